#pragma once
#include <cmath>
#include <limits>
#include <string>

#include "quant/core.hpp"
#include "quant/market_data.hpp"

namespace quant::indicators {

template <typename S>
struct OlsFitT {
    S alpha, beta, r2;
};
using OlsFit = OlsFitT<double>;

// Ordinary least squares of y on x. r2 = 1 - SSE/SST, with r2 := 0 when
// SST = 0 (a constant response has no explainable variance).
template <typename DY, typename DX>
OlsFitT<typename DY::Scalar> ols_fit(const Eigen::MatrixBase<DY>& y_expr,
                                     const Eigen::MatrixBase<DX>& x_expr) {
    using S = typename DY::Scalar;
    VecX<S> y = y_expr, x = x_expr;
    if (y.size() != x.size()) fail("ols_fit: length mismatch");
    if (y.size() < 2) fail("ols_fit: need at least 2 points");
    const S mx = x.mean(), my = y.mean();
    VecX<S> xc = x.array() - mx, yc = y.array() - my;
    const S sxx = xc.squaredNorm(), syy = yc.squaredNorm(), sxy = xc.dot(yc);
    if (sxx == S(0)) fail("ols_fit: degenerate regressor (zero variance)");
    OlsFitT<S> fit;
    fit.beta = sxy / sxx;
    fit.alpha = my - fit.beta * mx;
    if (syy == S(0)) {
        fit.r2 = S(0);
    } else {
        S sse = syy - fit.beta * sxy;
        if (sse < S(0)) sse = S(0);  // guards rounding on near-exact fits
        fit.r2 = S(1) - sse / syy;
        fit.r2 = std::min<S>(S(1), std::max<S>(S(0), fit.r2));
    }
    return fit;
}

// Undefined entries (warm-ups, degenerate windows) are encoded as NaN.
inline bool defined(double v) { return !std::isnan(v); }
inline double undefined_value() { return std::numeric_limits<double>::quiet_NaN(); }

struct SlopeSeries {
    Vec beta;  // per-day regression slope of high on low
    Vec r2;
};

struct RsrsSeries {
    Vec beta;
    Vec r2;
    Vec std;       // standardized slope
    Vec cor;       // std * r2
    Vec rightdev;  // cor * beta
};

enum class TimingSignal { Buy, Sell, Hold };

// Rolling OLS of high[t-l+1..t] on low[t-l+1..t]; first l-1 entries NaN.
SlopeSeries rsrs_slope(const data::Universe& u, const std::string& ticker,
                       Index l);

// Standardization over the trailing m defined betas, inclusive of day t,
// population sigma. sigma = 0 propagates NaN for that day.
RsrsSeries rsrs_scores(const Vec& beta, const Vec& r2, Index m);

TimingSignal rsrs_signal(double rightdev, double rs_buy, double rs_sell);
const char* signal_name(TimingSignal s);

// Seven technical factors with fixed parameterizations:
//   MACD  = EMA12 - EMA26 of close (EMA seeded at the first close)
//   SMA30 / SMA60 rolling means of close
//   BOLL  = SMA20 +/- 2 * population sigma20
//   RSI   period 14, Wilder smoothing (flat market -> 50)
//   CCI   period 20, 0.015 scaling (zero deviation -> 0)
//   ADX   period 14, Wilder smoothing (degenerate DI sum -> 0)
// Warm-up prefixes are NaN.
struct TechnicalSeries {
    Vec macd, sma30, sma60, boll_upper, boll_lower, rsi, cci, adx;
};

TechnicalSeries technical_block(const data::Universe& u,
                                const std::string& ticker);

// Audit dump: date,beta,r2,std,cor,rightdev,signal per day.
void dump_indicator_csv(const std::string& path, const data::Universe& u,
                        const std::string& ticker, const RsrsSeries& rsrs,
                        double rs_buy, double rs_sell);

}  // namespace quant::indicators
