#include "quant/trading_env.hpp"

#include <cmath>

#include "quant/indicators.hpp"

namespace quant::env {

using indicators::defined;

static void backfill(Vec& v) {
    Index first = -1;
    for (Index t = 0; t < v.size(); ++t)
        if (defined(v[t])) {
            first = t;
            break;
        }
    if (first < 0) {
        v.setZero();  // a column with no defined value carries no information
        return;
    }
    for (Index t = 0; t < first; ++t) v[t] = v[first];
    for (Index t = first + 1; t < v.size(); ++t)
        if (!defined(v[t])) v[t] = v[t - 1];  // interior gaps hold last value
}

MarketSlice build_market_slice(const data::Universe& u, Index l, Index m) {
    const Index T = u.days(), D = u.stocks();
    const Index warmup = std::max<Index>(60, l - 1 + m);
    require(T > warmup + 1, "build_market_slice: series shorter than warm-up");

    Mat block(T, D * kIndicatorCols);
    Mat rightdev(T, D);
    for (Index j = 0; j < D; ++j) {
        const auto& ticker = u.tickers[static_cast<size_t>(j)];
        auto tech = indicators::technical_block(u, ticker);
        auto slope = indicators::rsrs_slope(u, ticker, l);
        auto rsrs = indicators::rsrs_scores(slope.beta, slope.r2, m);

        Vec boll_mid = 0.5 * (tech.boll_upper + tech.boll_lower);
        Vec cols[kIndicatorCols] = {tech.macd, tech.sma30, tech.sma60, boll_mid,
                                    tech.rsi,  tech.cci,   tech.adx,   rsrs.rightdev};
        rightdev.col(j) = rsrs.rightdev;
        for (Index c = 0; c < kIndicatorCols; ++c) {
            backfill(cols[c]);
            block.col(j * kIndicatorCols + c) = cols[c];
        }
    }

    MarketSlice s;
    const Index n = T - warmup;
    s.dates.assign(u.calendar.begin() + warmup, u.calendar.end());
    s.close = u.close.middleRows(warmup, n);
    s.indicators = block.middleRows(warmup, n);
    s.rightdev_raw = rightdev.middleRows(warmup, n);
    s.tickers = u.tickers;
    return s;
}

MarketSlice slice_range(const MarketSlice& s, Index begin, Index end) {
    require(begin >= 0 && begin < end && end <= s.days(),
            "slice_range: bad day range");
    MarketSlice out;
    out.dates.assign(s.dates.begin() + begin, s.dates.begin() + end);
    out.close = s.close.middleRows(begin, end - begin);
    out.indicators = s.indicators.middleRows(begin, end - begin);
    out.rightdev_raw = s.rightdev_raw.middleRows(begin, end - begin);
    out.tickers = s.tickers;
    return out;
}

static Mat day_block(const MarketSlice& slice, Index t) {
    const Index D = slice.stocks();
    Mat out(D, kIndicatorCols);
    for (Index j = 0; j < D; ++j)
        out.row(j) = slice.indicators.row(t).segment(j * kIndicatorCols, kIndicatorCols);
    return out;
}

EnvState reset(const MarketSlice& slice, const EnvConfig& cfg) {
    require(slice.days() >= 2, "reset: slice shorter than 2 days");
    EnvState s;
    s.balance = cfg.initial_balance;
    s.prices = slice.close.row(0);
    s.holdings = VecI::Zero(slice.stocks());
    s.indicators = day_block(slice, 0);
    s.day_index = 0;
    return s;
}

double asset_value(const EnvState& s) {
    return s.balance + s.prices.dot(s.holdings.cast<double>());
}

double transaction_cost(const Vec& prices, const VecI& executed,
                        double cost_percentage) {
    require(prices.size() == executed.size(), "transaction_cost: length mismatch");
    return prices.dot(executed.cast<double>().cwiseAbs()) * cost_percentage;
}

Action clip_action(const EnvState& s, const Action& a, const EnvConfig& cfg) {
    const Index D = s.prices.size();
    require(a.shares.size() == D, "clip_action: dimension mismatch");
    Action out;
    out.shares = VecI::Zero(D);

    double cash = s.balance;
    for (Index i = 0; i < D; ++i) {  // sells settle first
        int req = std::clamp(a.shares[i], -cfg.hmax, cfg.hmax);
        if (req < 0) {
            int sell = std::min(-req, s.holdings[i]);
            out.shares[i] = -sell;
            cash += s.prices[i] * sell * (1.0 - cfg.cost_percentage);
        }
    }
    for (Index i = 0; i < D; ++i) {  // buys draw the rest in ticker order
        int req = std::clamp(a.shares[i], -cfg.hmax, cfg.hmax);
        if (req > 0) {
            double unit = s.prices[i] * (1.0 + cfg.cost_percentage);
            int afford = unit > 0 ? static_cast<int>(cash / unit) : 0;
            int buy = std::min(req, std::max(afford, 0));
            out.shares[i] = buy;
            cash -= unit * buy;
        }
    }
    return out;
}

Action apply_rsrs_override(const Action& a, const Vec& rightdev,
                           const EnvConfig& cfg) {
    require(cfg.override_enabled, "apply_rsrs_override: override disabled");
    require(rightdev.size() == a.shares.size(), "apply_rsrs_override: dimension mismatch");
    Action out = a;
    for (Index i = 0; i < rightdev.size(); ++i) {
        if (!defined(rightdev[i])) continue;
        if (rightdev[i] > cfg.rs_buy)
            out.shares[i] = cfg.hmax;
        else if (rightdev[i] < cfg.rs_sell)
            out.shares[i] = -cfg.hmax;
    }
    return out;
}

StepResult step(const MarketSlice& slice, const EnvConfig& cfg,
                const EnvState& s, const Action& a) {
    const Index t = s.day_index;
    if (t + 1 >= slice.days()) fail("step: episode already done");

    StepResult r;
    r.executed = clip_action(s, a, cfg).shares;
    r.cost = transaction_cost(s.prices, r.executed, cfg.cost_percentage);

    const double asset_before = asset_value(s);
    EnvState n;
    n.balance = s.balance - s.prices.dot(r.executed.cast<double>()) - r.cost;
    if (n.balance < 0) {
        require(n.balance > -1e-9 * cfg.initial_balance,
                "step: balance went negative");
        n.balance = 0;
    }
    n.holdings = s.holdings + r.executed;
    require((n.holdings.array() >= 0).all(), "step: holdings went negative");
    n.day_index = t + 1;
    n.prices = slice.close.row(t + 1);
    n.indicators = day_block(slice, t + 1);

    const double asset_after = asset_value(n);
    r.reward = (asset_after - asset_before -
                (cfg.literal_cost_reward ? r.cost : 0.0)) /
               asset_before * (cfg.reward_times_100 ? 100.0 : 1.0);
    r.done = (n.day_index + 1 >= slice.days());
    r.next_state = std::move(n);
    return r;
}

Vec encode_observation(const EnvState& s, const EnvConfig& cfg, const Vec& p0) {
    const Index D = s.prices.size();
    require(p0.size() == D, "encode_observation: p0 dimension mismatch");
    Vec obs(1 + D + D + D * kIndicatorCols);
    obs[0] = s.balance / cfg.initial_balance;
    obs.segment(1, D) = s.prices.cwiseQuotient(p0);
    obs.segment(1 + D, D) = s.holdings.cast<double>() / static_cast<double>(cfg.hmax);
    for (Index j = 0; j < D; ++j) {
        auto row = s.indicators.row(j);
        Index base = 1 + 2 * D + j * kIndicatorCols;
        obs[base + 0] = row[0] / p0[j];   // macd
        obs[base + 1] = row[1] / p0[j];   // sma30
        obs[base + 2] = row[2] / p0[j];   // sma60
        obs[base + 3] = row[3] / p0[j];   // boll midline
        obs[base + 4] = row[4] / 100.0;   // rsi
        obs[base + 5] = row[5] / 100.0;   // cci
        obs[base + 6] = row[6] / 100.0;   // adx
        obs[base + 7] = row[7];           // rightdev, raw
    }
    return obs;
}

double cumulative_reward(const Vec& rewards) { return rewards.sum(); }

}  // namespace quant::env
