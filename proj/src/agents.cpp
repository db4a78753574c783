#include "quant/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json_util.hpp"

namespace quant::agents {

SacAgent make_sac(Index obs_dim, Index act_dim, const SacConfig& cfg, Rng& rng) {
    require(obs_dim >= 1 && act_dim >= 1, "make_sac: bad dimensions");
    require(cfg.gamma > 0 && cfg.gamma < 1, "make_sac: gamma in (0,1)");
    require(cfg.alpha > 0, "make_sac: alpha > 0");
    SacAgent a;
    a.cfg = cfg;
    a.obs_dim = obs_dim;
    a.act_dim = act_dim;
    std::vector<Index> pw{obs_dim};
    for (Index h : cfg.hidden) pw.push_back(h);
    pw.push_back(2 * act_dim);
    std::vector<Index> qw{obs_dim + act_dim};
    for (Index h : cfg.hidden) qw.push_back(h);
    qw.push_back(1);
    Rng rp = rng.fork("policy"), r1 = rng.fork("q1"), r2 = rng.fork("q2");
    a.policy = nn::make_mlp<double>(pw, rp);
    a.q1 = nn::make_mlp<double>(qw, r1);
    a.q2 = nn::make_mlp<double>(qw, r2);
    a.q1_target = a.q1;
    a.q2_target = a.q2;
    a.opt_policy = nn::make_adam(a.policy, cfg.lr);
    a.opt_q1 = nn::make_adam(a.q1, cfg.lr);
    a.opt_q2 = nn::make_adam(a.q2, cfg.lr);
    return a;
}

double entropy(const Vec& log_probs) {
    require(log_probs.size() >= 1, "entropy: empty batch");
    return -log_probs.mean();
}

// Samples actions + log-probs for an observation batch (obs_dim x N).
struct PolicySample {
    nn::ForwardCache<double> cache;
    nn::HeadOut<double> head;
    Mat z;
    nn::SquashSample<double> squash;
};

static PolicySample policy_sample(const SacAgent& agent, const Mat& obs, Rng& rng) {
    PolicySample ps;
    Mat raw = nn::forward(agent.policy, obs, &ps.cache);
    ps.head = nn::gaussian_head(raw, agent.act_dim);
    ps.z.resize(agent.act_dim, obs.cols());
    for (Index n = 0; n < ps.z.cols(); ++n)
        for (Index i = 0; i < ps.z.rows(); ++i) ps.z(i, n) = rng.normal();
    ps.squash = nn::squashed_gaussian_sample(ps.head.mean, ps.head.log_std, ps.z);
    return ps;
}

static Mat stack_obs(const std::vector<const dyn::Transition*>& batch, bool next) {
    const Index N = static_cast<Index>(batch.size());
    Mat m(batch.front()->obs.size(), N);
    for (Index n = 0; n < N; ++n)
        m.col(n) = next ? batch[static_cast<size_t>(n)]->next_obs
                        : batch[static_cast<size_t>(n)]->obs;
    return m;
}

Vec q_target(const std::vector<const dyn::Transition*>& batch, SacAgent& agent,
             Rng& rng) {
    require(!batch.empty(), "q_target: empty batch");
    const Index N = static_cast<Index>(batch.size());
    Mat next_obs = stack_obs(batch, true);
    PolicySample ps = policy_sample(agent, next_obs, rng);

    Mat x(agent.obs_dim + agent.act_dim, N);
    x.topRows(agent.obs_dim) = next_obs;
    x.bottomRows(agent.act_dim) = ps.squash.action;
    Vec q1 = nn::forward(agent.q1_target, x).row(0);
    Vec q2 = nn::forward(agent.q2_target, x).row(0);

    Vec y(N);
    for (Index n = 0; n < N; ++n) {
        const auto& t = *batch[static_cast<size_t>(n)];
        double soft = std::min(q1[n], q2[n]) - agent.cfg.alpha * ps.squash.log_prob[n];
        y[n] = t.reward + agent.cfg.gamma * (t.done ? 0.0 : 1.0) * soft;
    }
    return y;
}

static void polyak(nn::Mlp<double>& target, const nn::Mlp<double>& online, double tau) {
    for (size_t i = 0; i < target.layers.size(); ++i) {
        target.layers[i].w = tau * online.layers[i].w + (1 - tau) * target.layers[i].w;
        target.layers[i].b = tau * online.layers[i].b + (1 - tau) * target.layers[i].b;
    }
}

LossReport sac_update(SacAgent& agent,
                      const std::vector<const dyn::Transition*>& batch,
                      double lr_q, double lr_pi, Rng& rng) {
    require(!batch.empty(), "sac_update: empty batch");
    const Index N = static_cast<Index>(batch.size());
    const double n = static_cast<double>(N);
    LossReport report;

    // ---- critic step -------------------------------------------------------
    Vec y = q_target(batch, agent, rng);
    Mat obs = stack_obs(batch, false);
    Mat x(agent.obs_dim + agent.act_dim, N);
    x.topRows(agent.obs_dim) = obs;
    for (Index c = 0; c < N; ++c)
        x.col(c).tail(agent.act_dim) = batch[static_cast<size_t>(c)]->action;

    auto critic_step = [&](nn::Mlp<double>& q, nn::AdamState<double>& opt) {
        nn::ForwardCache<double> cache;
        Vec pred = nn::forward(q, x, &cache).row(0);
        Vec err = pred - y;
        double mse = err.squaredNorm() / n;
        Mat upstream = (2.0 / n) * err.transpose();
        auto grads = nn::backward(q, cache, upstream);
        opt.lr = lr_q;
        nn::adam_step(opt, q, grads.layers);
        return mse;
    };
    double mse1 = critic_step(agent.q1, agent.opt_q1);
    double mse2 = critic_step(agent.q2, agent.opt_q2);
    report.q_loss = 0.5 * (mse1 + mse2);
    if (!std::isfinite(report.q_loss)) fail("sac_update: non-finite critic loss");

    // ---- policy step -------------------------------------------------------
    PolicySample ps = policy_sample(agent, obs, rng);
    const Mat& a = ps.squash.action;
    Mat xp(agent.obs_dim + agent.act_dim, N);
    xp.topRows(agent.obs_dim) = obs;
    xp.bottomRows(agent.act_dim) = a;

    nn::ForwardCache<double> c1, c2;
    Vec q1 = nn::forward(agent.q1, xp, &c1).row(0);
    Vec q2 = nn::forward(agent.q2, xp, &c2).row(0);

    report.pi_loss =
        (agent.cfg.alpha * ps.squash.log_prob.array() -
         q1.cwiseMin(q2).array())
            .mean();
    report.entropy = entropy(ps.squash.log_prob);
    if (!std::isfinite(report.pi_loss)) fail("sac_update: non-finite policy loss");

    // d(min q)/d action via the per-sample argmin net's input gradient.
    Mat sel1 = Mat::Zero(1, N), sel2 = Mat::Zero(1, N);
    for (Index c = 0; c < N; ++c)
        (q1[c] <= q2[c] ? sel1 : sel2)(0, c) = 1.0;
    Mat qgrad = nn::backward(agent.q1, c1, sel1).input.bottomRows(agent.act_dim) +
                nn::backward(agent.q2, c2, sel2).input.bottomRows(agent.act_dim);

    // dL/dmean and dL/dlog_std of mean(alpha*logp - min q), holding z fixed:
    //   dlogp/dmean_i   = 2 a_i
    //   dlogp/dls_i     = -1 + 2 a_i sigma_i z_i
    //   d(minq)/dmean_i = qgrad_i (1 - a_i^2)
    //   d(minq)/dls_i   = qgrad_i (1 - a_i^2) sigma_i z_i
    Mat sigma_z = ps.head.log_std.array().exp().matrix().cwiseProduct(ps.z);
    Mat one_m_a2 = (1.0 - a.array().square()).matrix();
    Mat dmean = (agent.cfg.alpha * 2.0 * a.array() -
                 qgrad.array() * one_m_a2.array())
                    .matrix() /
                n;
    Mat dls = (agent.cfg.alpha * (-1.0 + 2.0 * a.array() * sigma_z.array()) -
               qgrad.array() * one_m_a2.array() * sigma_z.array())
                  .matrix() /
              n;
    Mat upstream = nn::gaussian_head_upstream(ps.head, dmean, dls);
    auto pgrads = nn::backward(agent.policy, ps.cache, upstream);
    agent.opt_policy.lr = lr_pi;
    nn::adam_step(agent.opt_policy, agent.policy, pgrads.layers);

    polyak(agent.q1_target, agent.q1, agent.cfg.tau);
    polyak(agent.q2_target, agent.q2, agent.cfg.tau);
    return report;
}

Vec select_action(const SacAgent& agent, const Vec& obs, bool deterministic,
                  Rng& rng) {
    Mat raw = nn::forward(agent.policy, Mat(obs));
    auto head = nn::gaussian_head(raw, agent.act_dim);
    if (deterministic) return head.mean.col(0).array().tanh().matrix();
    Mat z(agent.act_dim, 1);
    for (Index i = 0; i < agent.act_dim; ++i) z(i, 0) = rng.normal();
    auto s = nn::squashed_gaussian_sample(head.mean, head.log_std, z);
    return s.action.col(0);
}

Vec cem_plan(const CemPlanner& planner, const DynamicsFn& dynamics,
             const Vec& obs, Index act_dim, Rng& rng) {
    require(planner.elites >= 1 && planner.elites <= planner.population,
            "cem_plan: elite count must fit the population");
    require(planner.horizon >= 1, "cem_plan: horizon >= 1");
    const Index dim = static_cast<Index>(planner.horizon) * act_dim;
    Vec mean = Vec::Zero(dim);
    Vec stdv = Vec::Constant(dim, planner.init_std);

    for (int it = 0; it < planner.iterations; ++it) {
        Mat pop(dim, planner.population);
        for (int p = 0; p < planner.population; ++p)
            for (Index i = 0; i < dim; ++i)
                pop(i, p) = std::clamp(mean[i] + stdv[i] * rng.normal(), -1.0, 1.0);

        std::vector<std::pair<double, int>> scored;
        scored.reserve(static_cast<size_t>(planner.population));
        for (int p = 0; p < planner.population; ++p) {
            Vec cur = obs;
            double total = 0;
            for (int h = 0; h < planner.horizon; ++h) {
                Vec a = pop.col(p).segment(h * act_dim, act_dim);
                auto [next, reward] = dynamics(cur, a);
                total += reward;
                cur = next;
            }
            scored.emplace_back(-total, p);  // ascending sort -> best first
        }
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        Vec new_mean = Vec::Zero(dim), new_var = Vec::Zero(dim);
        for (int e = 0; e < planner.elites; ++e)
            new_mean += pop.col(scored[static_cast<size_t>(e)].second);
        new_mean /= static_cast<double>(planner.elites);
        for (int e = 0; e < planner.elites; ++e) {
            Vec d = pop.col(scored[static_cast<size_t>(e)].second) - new_mean;
            new_var += d.cwiseProduct(d);
        }
        new_var /= static_cast<double>(planner.elites);
        mean = new_mean;
        stdv = new_var.array().sqrt().max(planner.std_floor).matrix();
    }
    return mean.head(act_dim);
}

DynamicsFn model_dynamics(const dyn::EnsembleModel& model) {
    return [&model](const Vec& obs, const Vec& act) {
        return dyn::predict_elite_mean(model, obs, act);
    };
}

Variant variant_from_name(const std::string& name) {
    std::string u;
    for (char c : name) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (u == "PETS") return Variant::PETS;
    if (u == "MBPO") return Variant::MBPO;
    if (u == "M2AC") return Variant::M2AC;
    if (u == "RSPO") return Variant::RSPO;
    if (u == "RSAC") return Variant::RSAC;
    fail("unknown variant '" + name + "' (PETS|MBPO|M2AC|RSPO|RSAC)");
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::PETS: return "PETS";
        case Variant::MBPO: return "MBPO";
        case Variant::M2AC: return "M2AC";
        case Variant::RSPO: return "RSPO";
        case Variant::RSAC: return "RSAC";
    }
    return "?";
}

static VecI shares_from_normalized(const Vec& a, int hmax) {
    VecI s(a.size());
    for (Index i = 0; i < a.size(); ++i)
        s[i] = static_cast<int>(std::trunc(static_cast<double>(hmax) * a[i]));
    return s;
}

TrainResult train(const TrainConfig& cfg, const env::MarketSlice& slice,
                  const env::EnvConfig& env_cfg0, std::uint64_t seed) {
    require(cfg.epochs >= 1 && cfg.steps_per_epoch >= 1, "train: counts >= 1");
    env::EnvConfig env_cfg = env_cfg0;
    env_cfg.override_enabled = variant_overrides(cfg.variant);

    env::TradingEnv env(slice, env_cfg);
    const Index D = slice.stocks();
    const Index obs_dim = env.observation().size();

    Rng master(seed);
    Rng init_rng = master.fork("init");
    Rng minit_rng = master.fork("model-init");
    Rng warm_rng = master.fork("warm");
    Rng model_rng = master.fork("model-train");
    Rng act_rng = master.fork("actions");
    Rng roll_rng = master.fork("rollouts");
    Rng upd_rng = master.fork("updates");

    TrainResult out;
    out.cfg = cfg;
    out.agent = make_sac(obs_dim, D, cfg.sac, init_rng);
    out.model = dyn::make_ensemble(obs_dim, D, cfg.model_hidden, cfg.model_members,
                                   cfg.model_elites, minit_rng);

    dyn::ReplayBuffer d_env(cfg.env_buffer_capacity);
    dyn::ReplayBuffer d_model(cfg.model_buffer_capacity);

    long env_steps = 0;
    auto take_env_step = [&](const Vec& a_norm, long* override_count) {
        env::Action act{shares_from_normalized(a_norm, env_cfg.hmax)};
        if (env_cfg.override_enabled) {
            VecI before = act.shares;
            act = env::apply_rsrs_override(act, env.rightdev_today(), env_cfg);
            if (override_count)
                *override_count += (act.shares.array() != before.array()).count();
        }
        dyn::Transition t;
        t.obs = env.observation();
        t.action = act.shares.cast<double>() / static_cast<double>(env_cfg.hmax);
        auto res = env.step(act);
        t.next_obs = env.observation();
        t.reward = res.reward;
        t.done = res.done;
        d_env.push(std::move(t));
        ++env_steps;
        double r = res.reward;
        if (res.done) env.reset();
        return r;
    };

    for (int i = 0; i < cfg.warm_start; ++i) {
        Vec a(D);
        for (Index j = 0; j < D; ++j) a[j] = warm_rng.uniform(-1.0, 1.0);
        long* counter = nullptr;
        take_env_step(a, counter);
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int e = 1; e <= cfg.epochs; ++e) {
        auto model_report = dyn::train_model(out.model, d_env, cfg.model_epochs,
                                             cfg.model_batch, cfg.model_holdout,
                                             cfg.model_lr, model_rng);
        double holdout_nll = 0;
        for (int m : out.model.elites)
            holdout_nll += model_report.holdout_nll[static_cast<size_t>(m)];
        holdout_nll /= static_cast<double>(out.model.elites.size());

        HistoryRow row;
        row.epoch = e;
        row.model_holdout_nll = holdout_nll;
        row.model_err_balance = model_report.holdout_abs_err[0];
        row.model_err_holdings =
            model_report.holdout_abs_err.segment(1 + D, D).mean();

        double reward_sum = 0, ql = 0, pl = 0, ent = 0;
        long updates = 0;
        for (int n = 0; n < cfg.steps_per_epoch; ++n) {
            Vec obs = env.observation();
            Vec a;
            if (cfg.variant == Variant::PETS) {
                a = cem_plan(cfg.cem, model_dynamics(out.model), obs, D, act_rng);
                ++out.cem_plan_calls;
            } else {
                a = select_action(out.agent, obs, false, act_rng);
            }
            reward_sum += take_env_step(a, &row.override_count);

            if (cfg.variant == Variant::PETS) continue;

            if (cfg.rollouts > 0 && d_env.size() >= 1) {
                size_t n_starts = std::min<size_t>(static_cast<size_t>(cfg.rollouts),
                                                   d_env.size());
                auto starts_batch = d_env.sample(n_starts, roll_rng);
                std::vector<Vec> starts;
                starts.reserve(n_starts);
                for (auto* t : starts_batch) starts.push_back(t->obs);
                auto policy = [&](const Vec& o) {
                    return select_action(out.agent, o, false, roll_rng);
                };
                auto trans = dyn::rollout(out.model, policy, starts, cfg.rollout_k,
                                          roll_rng, true);
                if (variant_masks(cfg.variant)) {
                    std::vector<double> scores;
                    scores.reserve(trans.size());
                    for (const auto& t : trans)
                        scores.push_back(dyn::uncertainty(out.model, t.obs, t.action));
                    trans = dyn::mask_rollouts(trans, scores, cfg.keep_fraction);
                }
                for (auto& t : trans) d_model.push(std::move(t));
            }
            for (int w = 0; w < cfg.updates; ++w) {
                if (d_model.size() == 0) break;
                size_t bs = std::min<size_t>(static_cast<size_t>(cfg.batch_size),
                                             d_model.size());
                auto batch = d_model.sample(bs, upd_rng);
                auto losses = sac_update(out.agent, batch, cfg.sac.lr, cfg.sac.lr,
                                         upd_rng);
                ++out.sac_update_calls;
                ql += losses.q_loss;
                pl += losses.pi_loss;
                ent += losses.entropy;
                ++updates;
            }
        }
        row.step = env_steps;
        row.env_reward = reward_sum / static_cast<double>(cfg.steps_per_epoch);
        row.q_loss = updates ? ql / static_cast<double>(updates) : nan;
        row.pi_loss = updates ? pl / static_cast<double>(updates) : nan;
        row.entropy = updates ? ent / static_cast<double>(updates) : nan;
        out.history.push_back(row);
    }
    return out;
}

backtest::EquityCurve evaluate(const TrainResult& trained,
                               const env::MarketSlice& slice,
                               const env::EnvConfig& env_cfg0,
                               const std::string& name, Rng* stochastic) {
    env::EnvConfig env_cfg = env_cfg0;
    env_cfg.override_enabled = variant_overrides(trained.cfg.variant);
    env::TradingEnv env(slice, env_cfg);
    const Index T = slice.days(), D = slice.stocks();

    backtest::EquityCurve curve;
    curve.name = name;
    curve.dates = slice.dates;
    curve.asset.resize(T);
    curve.rewards = Vec::Zero(T);
    curve.costs = Vec::Zero(T);
    curve.actions = Mat::Zero(T - 1, D);
    curve.asset[0] = env::asset_value(env.state());

    Rng fixed(0x5EEDED);  // deterministic-mode internal stream (planner noise)
    Rng& rng = stochastic ? *stochastic : fixed;
    Index t = 0;
    while (!env.done()) {
        Vec obs = env.observation();
        Vec a;
        if (trained.cfg.variant == Variant::PETS)
            a = cem_plan(trained.cfg.cem, model_dynamics(trained.model), obs, D, rng);
        else
            a = select_action(trained.agent, obs, stochastic == nullptr, rng);
        env::Action act{shares_from_normalized(a, env_cfg.hmax)};
        if (env_cfg.override_enabled)
            act = env::apply_rsrs_override(act, env.rightdev_today(), env_cfg);
        auto res = env.step(act);
        curve.asset[t + 1] = env::asset_value(res.next_state);
        curve.rewards[t + 1] = res.reward;
        curve.costs[t + 1] = res.cost;
        curve.actions.row(t) = res.executed.cast<double>();
        ++t;
    }
    return curve;
}

static std::string num_cell(double v) {
    char buf[48];
    if (std::isnan(v)) return "nan";
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_history_csv(const std::string& path,
                       const std::vector<HistoryRow>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("write_history_csv: cannot open " + path);
    out << "epoch,step,q_loss,pi_loss,entropy,model_holdout_nll,env_reward,"
           "model_err_balance,model_err_holdings,override_count\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << r.step << ',' << num_cell(r.q_loss) << ','
            << num_cell(r.pi_loss) << ',' << num_cell(r.entropy) << ','
            << num_cell(r.model_holdout_nll) << ',' << num_cell(r.env_reward)
            << ',' << num_cell(r.model_err_balance) << ','
            << num_cell(r.model_err_holdings) << ',' << r.override_count << '\n';
    }
}

std::vector<HistoryRow> read_history_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("read_history_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) fail(path + ": empty history");
    std::vector<HistoryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        require(cells.size() == 10, "history: expected 10 columns");
        HistoryRow r;
        r.epoch = std::stoi(cells[0]);
        r.step = std::stol(cells[1]);
        r.q_loss = std::stod(cells[2]);
        r.pi_loss = std::stod(cells[3]);
        r.entropy = std::stod(cells[4]);
        r.model_holdout_nll = std::stod(cells[5]);
        r.env_reward = std::stod(cells[6]);
        r.model_err_balance = std::stod(cells[7]);
        r.model_err_holdings = std::stod(cells[8]);
        r.override_count = std::stol(cells[9]);
        rows.push_back(r);
    }
    return rows;
}

using nlohmann::json;

std::string agent_to_json(const TrainResult& trained) {
    json j;
    j["format_version"] = 1;
    j["variant"] = variant_name(trained.cfg.variant);
    j["obs_dim"] = trained.agent.obs_dim;
    j["act_dim"] = trained.agent.act_dim;
    j["policy"] = nn::mlp_jobj(trained.agent.policy);
    j["q1"] = nn::mlp_jobj(trained.agent.q1);
    j["q2"] = nn::mlp_jobj(trained.agent.q2);
    j["q1_target"] = nn::mlp_jobj(trained.agent.q1_target);
    j["q2_target"] = nn::mlp_jobj(trained.agent.q2_target);
    j["model"] = json::parse(dyn::model_to_json(trained.model));
    json cem;
    cem["horizon"] = trained.cfg.cem.horizon;
    cem["population"] = trained.cfg.cem.population;
    cem["elites"] = trained.cfg.cem.elites;
    cem["iterations"] = trained.cfg.cem.iterations;
    cem["init_std"] = trained.cfg.cem.init_std;
    cem["std_floor"] = trained.cfg.cem.std_floor;
    j["cem"] = std::move(cem);
    json sac;
    sac["gamma"] = trained.cfg.sac.gamma;
    sac["tau"] = trained.cfg.sac.tau;
    sac["alpha"] = trained.cfg.sac.alpha;
    sac["lr"] = trained.cfg.sac.lr;
    j["sac"] = std::move(sac);
    return j.dump(1);
}

TrainResult agent_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        fail("agent checkpoint: unsupported format version");
    TrainResult out;
    out.cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    out.agent.obs_dim = j.at("obs_dim").get<Index>();
    out.agent.act_dim = j.at("act_dim").get<Index>();
    out.agent.policy = nn::mlp_unjobj(j.at("policy"));
    out.agent.q1 = nn::mlp_unjobj(j.at("q1"));
    out.agent.q2 = nn::mlp_unjobj(j.at("q2"));
    out.agent.q1_target = nn::mlp_unjobj(j.at("q1_target"));
    out.agent.q2_target = nn::mlp_unjobj(j.at("q2_target"));
    out.model = dyn::model_from_json(j.at("model").dump());
    const auto& cem = j.at("cem");
    out.cfg.cem.horizon = cem.at("horizon").get<int>();
    out.cfg.cem.population = cem.at("population").get<int>();
    out.cfg.cem.elites = cem.at("elites").get<int>();
    out.cfg.cem.iterations = cem.at("iterations").get<int>();
    out.cfg.cem.init_std = cem.at("init_std").get<double>();
    out.cfg.cem.std_floor = cem.at("std_floor").get<double>();
    const auto& sac = j.at("sac");
    out.cfg.sac.gamma = sac.at("gamma").get<double>();
    out.cfg.sac.tau = sac.at("tau").get<double>();
    out.cfg.sac.alpha = sac.at("alpha").get<double>();
    out.cfg.sac.lr = sac.at("lr").get<double>();
    out.agent.cfg = out.cfg.sac;
    out.agent.opt_policy = nn::make_adam(out.agent.policy, out.cfg.sac.lr);
    out.agent.opt_q1 = nn::make_adam(out.agent.q1, out.cfg.sac.lr);
    out.agent.opt_q2 = nn::make_adam(out.agent.q2, out.cfg.sac.lr);
    return out;
}

}  // namespace quant::agents
