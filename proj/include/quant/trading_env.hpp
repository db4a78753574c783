#pragma once
#include <string>
#include <vector>

#include "quant/core.hpp"
#include "quant/dates.hpp"
#include "quant/market_data.hpp"

namespace quant::env {

struct EnvConfig {
    double initial_balance = 1e6;
    int hmax = 100;
    double cost_percentage = 0.001;
    double rs_buy = 1.0;
    double rs_sell = -0.4;
    bool override_enabled = false;
    // Fidelity flag: subtract the cost a second time inside the reward
    // numerator (the literal double-deduction reading). Off by default.
    bool literal_cost_reward = false;
    // Ablation flag: drop the x100 scaling of the percentage reward.
    bool reward_times_100 = true;
};

// Per-stock observation block layout (8 columns per stock):
//   macd, sma30, sma60, boll_mid, rsi, cci, adx, rightdev
// boll_mid is the Bollinger midline (= SMA20): the env block carries one
// price-unit number per band pair so the observation stays 1 + D + D + 8D.
inline constexpr Index kIndicatorCols = 8;

struct MarketSlice {
    std::vector<Date> dates;  // length T
    Mat close;                // T x D
    Mat indicators;           // T x (8D), stock-major, warm-ups back-filled
    Mat rightdev_raw;         // T x D, NaN where undefined (override input)
    std::vector<std::string> tickers;

    Index days() const { return static_cast<Index>(dates.size()); }
    Index stocks() const { return close.cols(); }
};

// Computes indicators + RSRS for every ticker and drops the warm-up prefix
// (max(60, l-1+m) days, so every column of the block is defined at start;
// any interior NaN is back-filled with the first defined value).
MarketSlice build_market_slice(const data::Universe& u, Index l, Index m);

// Copy of the contiguous day range [begin, end).
MarketSlice slice_range(const MarketSlice& s, Index begin, Index end);

struct EnvState {
    double balance = 0;
    Vec prices;       // D closes of the current day
    VecI holdings;    // D non-negative share counts
    Mat indicators;   // D x 8 raw block of the current day
    Index day_index = 0;
};

struct Action {
    VecI shares;  // requested trade per stock, clipped to [-hmax, hmax]
};

struct StepResult {
    EnvState next_state;
    double reward = 0;  // percentage points
    bool done = false;
    VecI executed;
    double cost = 0;
};

EnvState reset(const MarketSlice& slice, const EnvConfig& cfg);

double asset_value(const EnvState& s);

double transaction_cost(const Vec& prices, const VecI& executed,
                        double cost_percentage);

// Sells clipped to holdings; buys clipped greedily in ticker order so that
// buy cost plus its transaction cost never overdraws the settled balance.
Action clip_action(const EnvState& s, const Action& a, const EnvConfig& cfg);

// Per stock: rightdev > rs_buy -> +hmax, rightdev < rs_sell -> -hmax,
// otherwise (or NaN) unchanged.
Action apply_rsrs_override(const Action& a, const Vec& rightdev,
                           const EnvConfig& cfg);

StepResult step(const MarketSlice& slice, const EnvConfig& cfg,
                const EnvState& s, const Action& a);

// [balance/B0, prices/P0 elementwise, holdings/hmax, indicator block
// normalized] — price-unit indicator columns divided by the stock's P0,
// bounded ones by 100, rightdev raw. Length 1 + D + D + 8D.
Vec encode_observation(const EnvState& s, const EnvConfig& cfg, const Vec& p0);

double cumulative_reward(const Vec& rewards);

// Convenience wrapper owning the episode cursor.
class TradingEnv {
  public:
    TradingEnv(const MarketSlice& slice, const EnvConfig& cfg)
        : slice_(&slice), cfg_(cfg), p0_(slice.close.row(0)) {
        require(slice.days() >= 2, "TradingEnv: slice shorter than 2 days");
        state_ = env::reset(slice, cfg);
    }

    EnvState reset() {
        state_ = env::reset(*slice_, cfg_);
        return state_;
    }
    StepResult step(const Action& a) {
        StepResult r = env::step(*slice_, cfg_, state_, a);
        state_ = r.next_state;
        return r;
    }
    const EnvState& state() const { return state_; }
    Vec observation() const { return encode_observation(state_, cfg_, p0_); }
    Vec rightdev_today() const {
        return slice_->rightdev_raw.row(state_.day_index);
    }
    Date today() const { return slice_->dates[static_cast<size_t>(state_.day_index)]; }
    bool done() const { return state_.day_index + 1 >= slice_->days(); }
    const Vec& p0() const { return p0_; }
    const EnvConfig& config() const { return cfg_; }
    const MarketSlice& slice() const { return *slice_; }

  private:
    const MarketSlice* slice_;
    EnvConfig cfg_;
    Vec p0_;
    EnvState state_;
};

}  // namespace quant::env
