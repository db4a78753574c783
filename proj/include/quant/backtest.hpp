#pragma once
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "quant/core.hpp"
#include "quant/dates.hpp"
#include "quant/indicators.hpp"

namespace quant::backtest {

inline constexpr double kTradingDaysPerYear = 252.0;

struct EquityCurve {
    std::string name;
    std::vector<Date> dates;  // length T
    Vec asset;                // length T, strictly positive
    Vec rewards;              // length T, [0] = 0
    Vec costs;                // length T, [0] = 0
    Mat actions;              // (T-1) x D executed shares (optional, may be 0x0)
};

// ret_t = Asset_{t+1} / Asset_t - 1
template <typename D>
VecX<typename D::Scalar> daily_returns(const Eigen::MatrixBase<D>& asset_expr) {
    using S = typename D::Scalar;
    VecX<S> a = asset_expr;
    if (a.size() < 2) fail("daily_returns: need at least 2 points");
    if ((a.array() <= S(0)).any()) fail("daily_returns: non-positive asset value");
    return (a.tail(a.size() - 1).array() / a.head(a.size() - 1).array() - S(1))
        .matrix();
}

template <typename D>
typename D::Scalar annualized_return(const Eigen::MatrixBase<D>& asset_expr) {
    using S = typename D::Scalar;
    VecX<S> a = asset_expr;
    if (a.size() < 2) fail("annualized_return: need at least 2 points");
    const S periods = static_cast<S>(a.size() - 1);
    return std::pow(a[a.size() - 1] / a[0], S(kTradingDaysPerYear) / periods) - S(1);
}

template <typename D>
typename D::Scalar cumulative_return(const Eigen::MatrixBase<D>& asset_expr) {
    using S = typename D::Scalar;
    VecX<S> a = asset_expr;
    if (a.size() < 2) fail("cumulative_return: need at least 2 points");
    return a[a.size() - 1] / a[0] - S(1);
}

// Sample (n-1) standard deviation scaled by sqrt(252).
template <typename D>
typename D::Scalar annualized_volatility(const Eigen::MatrixBase<D>& returns_expr) {
    using S = typename D::Scalar;
    VecX<S> r = returns_expr;
    if (r.size() < 2) fail("annualized_volatility: need at least 2 returns");
    const S mu = r.mean();
    const S var = (r.array() - mu).square().sum() / static_cast<S>(r.size() - 1);
    return std::sqrt(var) * std::sqrt(S(kTradingDaysPerYear));
}

// risk_free is an annual rate, applied as rf/252 per period.
template <typename D>
typename D::Scalar sharpe(const Eigen::MatrixBase<D>& returns_expr,
                          typename D::Scalar risk_free) {
    using S = typename D::Scalar;
    VecX<S> r = returns_expr;
    const S vol = annualized_volatility(r);
    if (vol <= S(0)) fail("sharpe: zero volatility");
    const S excess = r.mean() - risk_free / S(kTradingDaysPerYear);
    return excess * S(kTradingDaysPerYear) / vol;
}

// min_t Asset_t / max_{tau<=t} Asset_tau - 1, in [-1, 0].
template <typename D>
typename D::Scalar max_drawdown(const Eigen::MatrixBase<D>& asset_expr) {
    using S = typename D::Scalar;
    VecX<S> a = asset_expr;
    if (a.size() < 1) fail("max_drawdown: empty curve");
    S peak = a[0], worst = S(0);
    for (Index t = 0; t < a.size(); ++t) {
        peak = std::max(peak, a[t]);
        worst = std::min(worst, a[t] / peak - S(1));
    }
    return worst;
}

template <typename D>
typename D::Scalar calmar(const Eigen::MatrixBase<D>& asset_expr) {
    using S = typename D::Scalar;
    VecX<S> a = asset_expr;
    const S mdd = max_drawdown(a);
    if (mdd >= S(0)) fail("calmar: zero drawdown");
    return annualized_return(a) / -mdd;
}

// R^2 of an OLS fit of cumulative log returns against the time index.
template <typename D>
typename D::Scalar stability(const Eigen::MatrixBase<D>& asset_expr) {
    using S = typename D::Scalar;
    VecX<S> a = asset_expr;
    if (a.size() < 3) fail("stability: need at least 3 points");
    if ((a.array() <= S(0)).any()) fail("stability: non-positive asset value");
    VecX<S> y = (a.array() / a[0]).log().matrix();
    VecX<S> x(a.size());
    for (Index t = 0; t < a.size(); ++t) x[t] = static_cast<S>(t);
    return indicators::ols_fit(y, x).r2;
}

struct MetricsReport {
    std::optional<double> annualized_return, cumulative_return,
        annualized_volatility, sharpe, calmar, stability, max_drawdown;
    std::string period_start, period_end;
    Index periods = 0;
};

// Degenerate metrics (flat curve, zero drawdown, too few points) come back
// empty rather than erroring; report rendering shows them as "n/a".
MetricsReport compute_metrics(const EquityCurve& curve, double risk_free = 0.0);

// Buy-and-hold equity: Asset_t = B0 * index_t / index_0.
EquityCurve baseline_curve(const std::vector<Date>& dates, const Vec& index,
                           double initial_balance, const std::string& name);

struct ReportOptions {
    double risk_free = 0.0;
    std::string out_dir;  // empty -> no files written
    // Metrics-only rows (e.g. a cross-seed mean) merged into metrics.json.
    std::map<std::string, MetricsReport> extra_rows;
};

// Per-curve metrics, optional July-to-July yearly breakdown; writes
// metrics.json, equity_<name>.csv and yearly.csv when out_dir is set.
std::map<std::string, MetricsReport> report(const std::vector<EquityCurve>& curves,
                                            const ReportOptions& opt);

EquityCurve read_equity_csv(const std::string& path, const std::string& name);

}  // namespace quant::backtest
