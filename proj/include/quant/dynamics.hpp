#pragma once
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "quant/core.hpp"
#include "quant/nn.hpp"
#include "quant/rng.hpp"

namespace quant::dyn {

struct Transition {
    Vec obs, action, next_obs;
    double reward = 0;
    bool done = false;
};

// Bounded FIFO; batch sampling is uniform without replacement.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
        require(capacity >= 1, "ReplayBuffer: capacity >= 1");
    }
    void push(Transition t) {
        if (data_.size() == capacity_) data_.pop_front();
        data_.push_back(std::move(t));
    }
    size_t size() const { return data_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& operator[](size_t i) const { return data_[i]; }
    std::vector<const Transition*> sample(size_t n, Rng& rng) const;

  private:
    std::deque<Transition> data_;
    size_t capacity_;
};

// Z-score input normalizer with a floored std.
struct Normalizer {
    Vec mean, std;
    void fit(const Mat& inputs);  // inputs: dim x N
    Vec normalize(const Vec& v) const { return (v - mean).cwiseQuotient(std); }
    Vec denormalize(const Vec& v) const { return v.cwiseProduct(std) + mean; }
};

// B probabilistic members, each predicting a Gaussian over (delta_obs, reward).
struct EnsembleModel {
    std::vector<nn::Mlp<double>> members;
    Normalizer in_norm;
    std::vector<int> elites;  // indices, ascending holdout NLL
    Index obs_dim = 0, act_dim = 0;
    bool trained = false;

    Index members_count() const { return static_cast<Index>(members.size()); }
};

EnsembleModel make_ensemble(Index obs_dim, Index act_dim,
                            const std::vector<Index>& hidden, Index members,
                            Index n_elites, Rng& rng);

struct ModelTrainReport {
    std::vector<double> train_nll;    // per member, final epoch mean
    std::vector<double> holdout_nll;  // per member
    Vec holdout_abs_err;  // per obs coordinate, elite-mean deterministic
    double holdout_reward_abs_err = 0;
};

// Each member minimizes the Gaussian NLL of (next_obs - obs, reward) on its
// own bootstrap resample; elites are the members with the lowest holdout NLL.
ModelTrainReport train_model(EnsembleModel& model, const ReplayBuffer& buffer,
                             int epochs, int batch_size,
                             double holdout_fraction, double lr, Rng& rng);

// noise == nullptr -> deterministic (mean) prediction. noise must have
// obs_dim + 1 entries (delta_obs block, then reward).
std::pair<Vec, double> predict(const EnsembleModel& model, const Vec& obs,
                               const Vec& action, int member,
                               const Vec* noise = nullptr);

// Deterministic ensemble prediction: average of elite means.
std::pair<Vec, double> predict_elite_mean(const EnsembleModel& model,
                                          const Vec& obs, const Vec& action);

using PolicyFn = std::function<Vec(const Vec& obs)>;

// k-step trajectory-sampling rollouts: each step picks a fresh random elite;
// `sample` draws from the member Gaussian, otherwise the mean is used.
std::vector<Transition> rollout(const EnsembleModel& model, const PolicyFn& policy,
                                const std::vector<Vec>& start_obs, int k,
                                Rng& rng, bool sample = true);

// Mean pairwise L2 distance between elite mean predictions plus the mean
// predicted sigma magnitude.
double uncertainty(const EnsembleModel& model, const Vec& obs,
                   const Vec& action);

// Keeps ceil(keep_fraction * n) transitions with the lowest scores, stable.
std::vector<Transition> mask_rollouts(const std::vector<Transition>& transitions,
                                      const std::vector<double>& scores,
                                      double keep_fraction);

std::string model_to_json(const EnsembleModel& model);
EnsembleModel model_from_json(const std::string& text);

}  // namespace quant::dyn
