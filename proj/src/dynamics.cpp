#include "quant/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json_util.hpp"

namespace quant::dyn {

std::vector<const Transition*> ReplayBuffer::sample(size_t n, Rng& rng) const {
    require(n >= 1 && n <= data_.size(), "ReplayBuffer::sample: batch exceeds buffer");
    // Partial Fisher-Yates over an index vector: distinct indices per batch.
    std::vector<size_t> idx(data_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<const Transition*> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + static_cast<size_t>(rng.bounded(static_cast<std::int64_t>(idx.size() - i)));
        std::swap(idx[i], idx[j]);
        out.push_back(&data_[idx[i]]);
    }
    return out;
}

void Normalizer::fit(const Mat& inputs) {
    require(inputs.cols() >= 1, "Normalizer::fit: empty input");
    mean = inputs.rowwise().mean();
    Vec var = (inputs.colwise() - mean).array().square().rowwise().mean().matrix();
    std = var.array().sqrt().max(1e-8).matrix();
}

EnsembleModel make_ensemble(Index obs_dim, Index act_dim,
                            const std::vector<Index>& hidden, Index members,
                            Index n_elites, Rng& rng) {
    require(members >= 2, "make_ensemble: B >= 2");
    require(n_elites >= 1 && n_elites <= members, "make_ensemble: bad elite count");
    EnsembleModel m;
    m.obs_dim = obs_dim;
    m.act_dim = act_dim;
    std::vector<Index> widths;
    widths.push_back(obs_dim + act_dim);
    for (Index h : hidden) widths.push_back(h);
    widths.push_back(2 * (obs_dim + 1));  // gaussian head over (delta_obs, reward)
    for (Index b = 0; b < members; ++b) {
        Rng r = rng.fork(hash_label("member") + static_cast<std::uint64_t>(b));
        m.members.push_back(nn::make_mlp<double>(widths, r));
    }
    m.elites.resize(static_cast<size_t>(n_elites));
    std::iota(m.elites.begin(), m.elites.end(), 0);
    return m;
}

static Vec model_input(const EnsembleModel& m, const Vec& obs, const Vec& act) {
    require(obs.size() == m.obs_dim && act.size() == m.act_dim,
            "model input dimension mismatch");
    Vec x(m.obs_dim + m.act_dim);
    x << obs, act;
    return x;
}

ModelTrainReport train_model(EnsembleModel& model, const ReplayBuffer& buffer,
                             int epochs, int batch_size,
                             double holdout_fraction, double lr, Rng& rng) {
    const size_t n = buffer.size();
    require(n >= 2, "train_model: buffer too small");
    require(epochs >= 1 && batch_size >= 1, "train_model: bad epochs/batch");
    require(holdout_fraction > 0 && holdout_fraction < 1,
            "train_model: holdout_fraction in (0,1)");

    const Index in_dim = model.obs_dim + model.act_dim;
    const Index out_dim = model.obs_dim + 1;
    Mat X(in_dim, static_cast<Index>(n)), Y(out_dim, static_cast<Index>(n));
    for (size_t i = 0; i < n; ++i) {
        const Transition& t = buffer[i];
        X.col(static_cast<Index>(i)) = model_input(model, t.obs, t.action);
        Y.col(static_cast<Index>(i)).head(model.obs_dim) = t.next_obs - t.obs;
        Y(out_dim - 1, static_cast<Index>(i)) = t.reward;
    }
    model.in_norm.fit(X);
    Mat Xn = ((X.colwise() - model.in_norm.mean).array().colwise() /
              model.in_norm.std.array())
                 .matrix();

    // Seeded shuffle, then split off the holdout tail.
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = 0; i + 1 < n; ++i) {
        size_t j = i + static_cast<size_t>(rng.bounded(static_cast<std::int64_t>(n - i)));
        std::swap(order[i], order[j]);
    }
    size_t n_hold = std::max<size_t>(1, static_cast<size_t>(std::ceil(holdout_fraction * n)));
    if (n_hold >= n) n_hold = n - 1;
    const size_t n_train = n - n_hold;
    std::vector<Index> train_idx(order.begin(), order.begin() + n_train);
    std::vector<Index> hold_idx(order.begin() + n_train, order.end());

    Mat Xh(in_dim, static_cast<Index>(n_hold)), Yh(out_dim, static_cast<Index>(n_hold));
    for (size_t i = 0; i < n_hold; ++i) {
        Xh.col(static_cast<Index>(i)) = Xn.col(hold_idx[i]);
        Yh.col(static_cast<Index>(i)) = Y.col(hold_idx[i]);
    }

    ModelTrainReport report;
    report.train_nll.resize(model.members.size(), 0.0);
    report.holdout_nll.resize(model.members.size(), 0.0);

    for (size_t b = 0; b < model.members.size(); ++b) {
        Rng member_rng = rng.fork(hash_label("train") + static_cast<std::uint64_t>(b));
        // Bootstrap resample of the training split.
        std::vector<Index> boot(n_train);
        for (size_t i = 0; i < n_train; ++i)
            boot[i] = train_idx[static_cast<size_t>(
                member_rng.bounded(static_cast<std::int64_t>(n_train)))];

        auto& net = model.members[b];
        auto opt = nn::make_adam(net, lr);
        double last_epoch_nll = 0;
        for (int e = 0; e < epochs; ++e) {
            for (size_t i = 0; i + 1 < boot.size(); ++i) {
                size_t j = i + static_cast<size_t>(member_rng.bounded(
                                   static_cast<std::int64_t>(boot.size() - i)));
                std::swap(boot[i], boot[j]);
            }
            double epoch_nll = 0;
            size_t batches = 0;
            for (size_t start = 0; start < n_train; start += static_cast<size_t>(batch_size)) {
                size_t len = std::min<size_t>(static_cast<size_t>(batch_size), n_train - start);
                Mat xb(in_dim, static_cast<Index>(len)), yb(out_dim, static_cast<Index>(len));
                for (size_t i = 0; i < len; ++i) {
                    xb.col(static_cast<Index>(i)) = Xn.col(boot[start + i]);
                    yb.col(static_cast<Index>(i)) = Y.col(boot[start + i]);
                }
                nn::ForwardCache<double> cache;
                Mat raw = nn::forward(net, xb, &cache);
                auto head = nn::gaussian_head(raw, out_dim);
                double nll = nn::gaussian_nll(head.mean, head.log_std, yb) /
                             static_cast<double>(len);
                Mat dmean, dls;
                nn::gaussian_nll_grad(head.mean, head.log_std, yb, dmean, dls);
                dmean /= static_cast<double>(len);
                dls /= static_cast<double>(len);
                Mat upstream = nn::gaussian_head_upstream(head, dmean, dls);
                auto grads = nn::backward(net, cache, upstream);
                nn::adam_step(opt, net, grads.layers);
                epoch_nll += nll;
                ++batches;
            }
            last_epoch_nll = batches ? epoch_nll / static_cast<double>(batches) : 0.0;
        }
        report.train_nll[b] = last_epoch_nll;

        nn::ForwardCache<double> cache;
        Mat raw = nn::forward(net, Xh);
        auto head = nn::gaussian_head(raw, out_dim);
        report.holdout_nll[b] = nn::gaussian_nll(head.mean, head.log_std, Yh) /
                                static_cast<double>(n_hold);
    }

    // Elites: lowest holdout NLL, index tie-break.
    std::vector<int> idx(model.members.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int c) {
        return report.holdout_nll[static_cast<size_t>(a)] <
               report.holdout_nll[static_cast<size_t>(c)];
    });
    const size_t n_elites = model.elites.size();
    model.elites.assign(idx.begin(), idx.begin() + static_cast<long>(n_elites));
    model.trained = true;

    // Holdout diagnostics with the deterministic elite-mean prediction.
    report.holdout_abs_err = Vec::Zero(model.obs_dim);
    for (size_t i = 0; i < n_hold; ++i) {
        const Transition& t = buffer[static_cast<size_t>(hold_idx[i])];
        auto [next, rew] = predict_elite_mean(model, t.obs, t.action);
        report.holdout_abs_err += (next - t.next_obs).cwiseAbs();
        report.holdout_reward_abs_err += std::abs(rew - t.reward);
    }
    report.holdout_abs_err /= static_cast<double>(n_hold);
    report.holdout_reward_abs_err /= static_cast<double>(n_hold);
    return report;
}

static std::pair<Vec, double> split_prediction(const EnsembleModel& model,
                                               const Vec& obs, const Vec& mean,
                                               const Vec& sigma,
                                               const Vec* noise) {
    Vec delta = mean.head(model.obs_dim);
    double reward = mean[model.obs_dim];
    if (noise) {
        require(noise->size() == model.obs_dim + 1, "predict: noise dimension mismatch");
        delta += sigma.head(model.obs_dim).cwiseProduct(noise->head(model.obs_dim));
        reward += sigma[model.obs_dim] * (*noise)[model.obs_dim];
    }
    return {obs + delta, reward};
}

std::pair<Vec, double> predict(const EnsembleModel& model, const Vec& obs,
                               const Vec& action, int member, const Vec* noise) {
    require(model.trained, "predict: model not trained");
    if (member < 0 || member >= static_cast<int>(model.members.size()))
        fail("predict: member index out of range");
    Vec x = model.in_norm.normalize(model_input(model, obs, action));
    Mat raw = nn::forward(model.members[static_cast<size_t>(member)], Mat(x));
    auto head = nn::gaussian_head(raw, model.obs_dim + 1);
    Vec mean = head.mean.col(0);
    Vec sigma = head.log_std.col(0).array().exp().matrix();
    return split_prediction(model, obs, mean, sigma, noise);
}

std::pair<Vec, double> predict_elite_mean(const EnsembleModel& model,
                                          const Vec& obs, const Vec& action) {
    require(model.trained, "predict_elite_mean: model not trained");
    Vec x = model.in_norm.normalize(model_input(model, obs, action));
    Vec mean = Vec::Zero(model.obs_dim + 1);
    for (int e : model.elites) {
        Mat raw = nn::forward(model.members[static_cast<size_t>(e)], Mat(x));
        auto head = nn::gaussian_head(raw, model.obs_dim + 1);
        mean += head.mean.col(0);
    }
    mean /= static_cast<double>(model.elites.size());
    return split_prediction(model, obs, mean, Vec(), nullptr);
}

std::vector<Transition> rollout(const EnsembleModel& model, const PolicyFn& policy,
                                const std::vector<Vec>& start_obs, int k,
                                Rng& rng, bool sample) {
    require(k >= 1, "rollout: k >= 1");
    require(model.trained, "rollout: model not trained");
    std::vector<Transition> out;
    out.reserve(start_obs.size() * static_cast<size_t>(k));
    for (const Vec& start : start_obs) {
        Vec cur = start;
        for (int s = 0; s < k; ++s) {
            Transition t;
            t.obs = cur;
            t.action = policy(cur);
            int member = model.elites[static_cast<size_t>(
                rng.bounded(static_cast<std::int64_t>(model.elites.size())))];
            if (sample) {
                Vec z(model.obs_dim + 1);
                for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
                auto [next, rew] = predict(model, cur, t.action, member, &z);
                t.next_obs = next;
                t.reward = rew;
            } else {
                auto [next, rew] = predict(model, cur, t.action, member, nullptr);
                t.next_obs = next;
                t.reward = rew;
            }
            t.done = false;  // the env terminates on time only, never early
            cur = t.next_obs;
            out.push_back(std::move(t));
        }
    }
    return out;
}

double uncertainty(const EnsembleModel& model, const Vec& obs, const Vec& action) {
    require(model.trained, "uncertainty: model not trained");
    require(model.elites.size() >= 2, "uncertainty: need at least 2 elites");
    Vec x = model.in_norm.normalize(model_input(model, obs, action));
    std::vector<Vec> means;
    double sigma_mag = 0;
    for (int e : model.elites) {
        Mat raw = nn::forward(model.members[static_cast<size_t>(e)], Mat(x));
        auto head = nn::gaussian_head(raw, model.obs_dim + 1);
        means.push_back(head.mean.col(0));
        sigma_mag += head.log_std.col(0).array().exp().mean();
    }
    sigma_mag /= static_cast<double>(means.size());
    double dis = 0;
    int pairs = 0;
    for (size_t i = 0; i < means.size(); ++i)
        for (size_t j = i + 1; j < means.size(); ++j) {
            dis += (means[i] - means[j]).norm();
            ++pairs;
        }
    return dis / static_cast<double>(pairs) + sigma_mag;
}

std::vector<Transition> mask_rollouts(const std::vector<Transition>& transitions,
                                      const std::vector<double>& scores,
                                      double keep_fraction) {
    require(transitions.size() == scores.size(), "mask_rollouts: misaligned lengths");
    require(keep_fraction > 0 && keep_fraction <= 1,
            "mask_rollouts: keep_fraction in (0, 1]");
    if (transitions.empty()) return {};
    const size_t keep = static_cast<size_t>(
        std::ceil(keep_fraction * static_cast<double>(transitions.size())));
    std::vector<size_t> idx(transitions.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());  // restore original order
    std::vector<Transition> out;
    out.reserve(keep);
    for (size_t i : idx) out.push_back(transitions[i]);
    return out;
}

using nlohmann::json;

std::string model_to_json(const EnsembleModel& model) {
    json j;
    j["format_version"] = 1;
    j["obs_dim"] = model.obs_dim;
    j["act_dim"] = model.act_dim;
    j["trained"] = model.trained;
    j["elites"] = model.elites;
    j["norm_mean"] = nn::vec_jobj(model.in_norm.mean);
    j["norm_std"] = nn::vec_jobj(model.in_norm.std);
    json members = json::array();
    for (const auto& m : model.members) members.push_back(nn::mlp_jobj(m));
    j["members"] = std::move(members);
    return j.dump(1);
}

EnsembleModel model_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        fail("model checkpoint: unsupported format version");
    EnsembleModel m;
    m.obs_dim = j.at("obs_dim").get<Index>();
    m.act_dim = j.at("act_dim").get<Index>();
    m.trained = j.at("trained").get<bool>();
    m.elites = j.at("elites").get<std::vector<int>>();
    m.in_norm.mean = nn::vec_unjobj(j.at("norm_mean"));
    m.in_norm.std = nn::vec_unjobj(j.at("norm_std"));
    for (const auto& mj : j.at("members")) m.members.push_back(nn::mlp_unjobj(mj));
    require(m.members.size() >= 2, "model checkpoint: need B >= 2 members");
    return m;
}

}  // namespace quant::dyn
