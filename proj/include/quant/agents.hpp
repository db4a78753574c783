#pragma once
#include <functional>
#include <string>
#include <vector>

#include "quant/backtest.hpp"
#include "quant/core.hpp"
#include "quant/dynamics.hpp"
#include "quant/nn.hpp"
#include "quant/rng.hpp"
#include "quant/trading_env.hpp"

namespace quant::agents {

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 0.2;  // fixed entropy weight, no auto-tuning
    double lr = 3e-4;
    std::vector<Index> hidden = {64, 64};
};

struct SacAgent {
    nn::Mlp<double> policy;  // obs -> gaussian head over actions (2 * act_dim)
    nn::Mlp<double> q1, q2, q1_target, q2_target;
    nn::AdamState<double> opt_policy, opt_q1, opt_q2;
    SacConfig cfg;
    Index obs_dim = 0, act_dim = 0;
};

SacAgent make_sac(Index obs_dim, Index act_dim, const SacConfig& cfg, Rng& rng);

// Mean of -log_prob over a batch.
double entropy(const Vec& log_probs);

// y = r + gamma * (1 - done) * (min_j Qtarget_j(s', a') - alpha * log pi(a'|s'))
// with a' sampled fresh from the current policy. No gradients flow here.
Vec q_target(const std::vector<const dyn::Transition*>& batch, SacAgent& agent,
             Rng& rng);

struct LossReport {
    double q_loss = 0, pi_loss = 0, entropy = 0;
};

// One gradient step on both Q nets (MSE vs y), one reparameterized policy
// step on E[alpha*log pi - min_j Q_j(s, a~)], then Polyak target updates.
// Reports pre-update losses.
LossReport sac_update(SacAgent& agent,
                      const std::vector<const dyn::Transition*>& batch,
                      double lr_q, double lr_pi, Rng& rng);

// Stochastic: squashed Gaussian sample. Deterministic: tanh(mean).
Vec select_action(const SacAgent& agent, const Vec& obs, bool deterministic,
                  Rng& rng);

struct CemPlanner {
    int horizon = 5;
    int population = 64;
    int elites = 8;
    int iterations = 5;
    double init_std = 0.5;
    double std_floor = 0.05;
};

using DynamicsFn = std::function<std::pair<Vec, double>(const Vec& obs, const Vec& act)>;

// Iterative elite refit over action sequences in (-1,1)^(H*act_dim);
// returns the first action of the final mean.
Vec cem_plan(const CemPlanner& planner, const DynamicsFn& dynamics,
             const Vec& obs, Index act_dim, Rng& rng);

// Deterministic elite-mean adapter for planning on a trained ensemble.
DynamicsFn model_dynamics(const dyn::EnsembleModel& model);

enum class Variant { PETS, MBPO, M2AC, RSPO, RSAC };
Variant variant_from_name(const std::string& name);
const char* variant_name(Variant v);
inline bool variant_overrides(Variant v) {
    return v == Variant::RSPO || v == Variant::RSAC;
}
inline bool variant_masks(Variant v) {
    return v == Variant::M2AC || v == Variant::RSAC;
}

struct TrainConfig {
    Variant variant = Variant::MBPO;
    int epochs = 10;           // E
    int steps_per_epoch = 100; // N
    int rollouts = 64;         // L, model rollouts per env step
    int rollout_k = 3;         // k
    int updates = 10;          // W, SAC updates per env step
    int batch_size = 256;
    int warm_start = 1000;     // uniform-random env steps before epoch 1
    double keep_fraction = 0.5;
    SacConfig sac;
    // dynamics model
    int model_members = 5;
    int model_elites = 3;
    int model_epochs = 10;
    int model_batch = 32;
    double model_lr = 3e-4;
    double model_holdout = 0.2;
    std::vector<Index> model_hidden = {64, 64};
    CemPlanner cem;
    size_t env_buffer_capacity = 100000;
    size_t model_buffer_capacity = 100000;
};

struct HistoryRow {
    int epoch = 0;
    long step = 0;  // cumulative env steps at epoch end
    double q_loss = 0, pi_loss = 0, entropy = 0;
    double model_holdout_nll = 0;
    double env_reward = 0;
    double model_err_balance = 0, model_err_holdings = 0;
    long override_count = 0;
};

struct TrainResult {
    SacAgent agent;
    dyn::EnsembleModel model;
    std::vector<HistoryRow> history;
    long sac_update_calls = 0;  // structural: stays 0 for PETS
    long cem_plan_calls = 0;
    TrainConfig cfg;
};

// Per epoch: fit the model on D_env; for each of N env steps take a policy
// (or planned) action, apply the RSRS override for RSPO/RSAC, store the real
// transition, roll the model out into D_model (masked for M2AC/RSAC) and run
// W SAC updates on D_model batches. PETS plans with CEM and never touches SAC.
TrainResult train(const TrainConfig& cfg, const env::MarketSlice& slice,
                  const env::EnvConfig& env_cfg, std::uint64_t seed);

// Deterministic evaluation pass through a slice (stochastic when a seed rng
// is supplied); override stays active for RSPO/RSAC.
backtest::EquityCurve evaluate(const TrainResult& trained,
                               const env::MarketSlice& slice,
                               const env::EnvConfig& env_cfg,
                               const std::string& name, Rng* stochastic = nullptr);

void write_history_csv(const std::string& path,
                       const std::vector<HistoryRow>& history);
std::vector<HistoryRow> read_history_csv(const std::string& path);

// Checkpoint bundle: policy + Q nets + model + dims + variant + planner.
std::string agent_to_json(const TrainResult& trained);
TrainResult agent_from_json(const std::string& text);

}  // namespace quant::agents
