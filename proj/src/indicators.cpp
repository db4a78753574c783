#include "quant/indicators.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace quant::indicators {

static Index ticker_col(const data::Universe& u, const std::string& ticker) {
    auto it = std::find(u.tickers.begin(), u.tickers.end(), ticker);
    if (it == u.tickers.end()) fail("unknown ticker " + ticker);
    return static_cast<Index>(it - u.tickers.begin());
}

SlopeSeries rsrs_slope(const data::Universe& u, const std::string& ticker,
                       Index l) {
    require(l >= 2, "rsrs_slope: l >= 2");
    const Index T = u.days();
    if (l > T) fail("rsrs_slope: window exceeds series length");
    const Index j = ticker_col(u, ticker);

    SlopeSeries s;
    s.beta = Vec::Constant(T, undefined_value());
    s.r2 = Vec::Constant(T, undefined_value());
    for (Index t = l - 1; t < T; ++t) {
        auto fit = ols_fit(u.high.col(j).segment(t - l + 1, l),
                           u.low.col(j).segment(t - l + 1, l));
        s.beta[t] = fit.beta;
        s.r2[t] = fit.r2;
    }
    return s;
}

RsrsSeries rsrs_scores(const Vec& beta, const Vec& r2, Index m) {
    require(m >= 2, "rsrs_scores: m >= 2");
    require(beta.size() == r2.size(), "rsrs_scores: beta/r2 misaligned");
    const Index T = beta.size();

    RsrsSeries out;
    out.beta = beta;
    out.r2 = r2;
    out.std = Vec::Constant(T, undefined_value());
    out.cor = Vec::Constant(T, undefined_value());
    out.rightdev = Vec::Constant(T, undefined_value());

    // Indices of defined betas, in order; windows run over this sequence so
    // warm-up gaps never contaminate the moments.
    std::vector<Index> def;
    def.reserve(static_cast<size_t>(T));
    for (Index t = 0; t < T; ++t)
        if (defined(beta[t])) def.push_back(t);

    for (size_t n = 0; n < def.size(); ++n) {
        if (n + 1 < static_cast<size_t>(m)) continue;
        const Index t = def[n];
        double mu = 0;
        for (size_t i = n + 1 - m; i <= n; ++i) mu += beta[def[i]];
        mu /= static_cast<double>(m);
        double var = 0;
        for (size_t i = n + 1 - m; i <= n; ++i) {
            double d = beta[def[i]] - mu;
            var += d * d;
        }
        var /= static_cast<double>(m);  // population sigma
        if (var <= 0) continue;         // sigma = 0 -> undefined, not an error
        double sigma = std::sqrt(var);
        out.std[t] = (beta[t] - mu) / sigma;
        out.cor[t] = out.std[t] * r2[t];
        out.rightdev[t] = out.cor[t] * beta[t];
    }
    return out;
}

TimingSignal rsrs_signal(double rightdev, double rs_buy, double rs_sell) {
    require(rs_sell < rs_buy, "rsrs_signal: rs_sell must be below rs_buy");
    if (!defined(rightdev)) return TimingSignal::Hold;
    if (rightdev > rs_buy) return TimingSignal::Buy;
    if (rightdev < rs_sell) return TimingSignal::Sell;
    return TimingSignal::Hold;
}

const char* signal_name(TimingSignal s) {
    switch (s) {
        case TimingSignal::Buy: return "buy";
        case TimingSignal::Sell: return "sell";
        default: return "hold";
    }
}

static Vec rolling_mean(const Vec& x, Index n) {
    Vec out = Vec::Constant(x.size(), undefined_value());
    for (Index t = n - 1; t < x.size(); ++t) out[t] = x.segment(t - n + 1, n).mean();
    return out;
}

static Vec ema(const Vec& x, Index n) {
    const double lambda = 2.0 / (static_cast<double>(n) + 1.0);
    Vec out(x.size());
    out[0] = x[0];
    for (Index t = 1; t < x.size(); ++t)
        out[t] = lambda * x[t] + (1.0 - lambda) * out[t - 1];
    return out;
}

TechnicalSeries technical_block(const data::Universe& u,
                                const std::string& ticker) {
    const Index T = u.days();
    if (T < 60) fail("technical_block: need at least 60 days (SMA60 warm-up)");
    const Index j = ticker_col(u, ticker);
    Vec close = u.close.col(j), high = u.high.col(j), low = u.low.col(j);

    TechnicalSeries ts;
    ts.macd = ema(close, 12) - ema(close, 26);
    ts.sma30 = rolling_mean(close, 30);
    ts.sma60 = rolling_mean(close, 60);

    ts.boll_upper = Vec::Constant(T, undefined_value());
    ts.boll_lower = Vec::Constant(T, undefined_value());
    for (Index t = 19; t < T; ++t) {
        auto w = close.segment(t - 19, 20);
        double mu = w.mean();
        double sd = std::sqrt((w.array() - mu).square().sum() / 20.0);
        ts.boll_upper[t] = mu + 2.0 * sd;
        ts.boll_lower[t] = mu - 2.0 * sd;
    }

    // RSI(14), Wilder. avg gain/loss seeded by the simple mean of the first
    // 14 changes; both zero -> neutral 50.
    ts.rsi = Vec::Constant(T, undefined_value());
    {
        const Index p = 14;
        if (T > p) {
            double ag = 0, al = 0;
            for (Index t = 1; t <= p; ++t) {
                double ch = close[t] - close[t - 1];
                ag += std::max(ch, 0.0);
                al += std::max(-ch, 0.0);
            }
            ag /= p;
            al /= p;
            auto rsi_at = [](double g, double l) {
                if (g == 0 && l == 0) return 50.0;
                if (l == 0) return 100.0;
                return 100.0 - 100.0 / (1.0 + g / l);
            };
            ts.rsi[p] = rsi_at(ag, al);
            for (Index t = p + 1; t < T; ++t) {
                double ch = close[t] - close[t - 1];
                ag = (ag * (p - 1) + std::max(ch, 0.0)) / p;
                al = (al * (p - 1) + std::max(-ch, 0.0)) / p;
                ts.rsi[t] = rsi_at(ag, al);
            }
        }
    }

    // CCI(20), 0.015 scaling on mean absolute deviation of the typical price.
    ts.cci = Vec::Constant(T, undefined_value());
    {
        Vec tp = (high + low + close) / 3.0;
        for (Index t = 19; t < T; ++t) {
            auto w = tp.segment(t - 19, 20);
            double mu = w.mean();
            double md = (w.array() - mu).abs().mean();
            ts.cci[t] = md == 0 ? 0.0 : (tp[t] - mu) / (0.015 * md);
        }
    }

    // ADX(14), Wilder: smoothed TR/±DM -> ±DI -> DX -> ADX (first ADX is the
    // mean of the first 14 DX values).
    ts.adx = Vec::Constant(T, undefined_value());
    {
        const Index p = 14;
        if (T > 2 * p) {
            Vec tr(T), pdm(T), ndm(T);
            tr[0] = pdm[0] = ndm[0] = 0;
            for (Index t = 1; t < T; ++t) {
                double up = high[t] - high[t - 1];
                double dn = low[t - 1] - low[t];
                pdm[t] = (up > dn && up > 0) ? up : 0.0;
                ndm[t] = (dn > up && dn > 0) ? dn : 0.0;
                tr[t] = std::max({high[t] - low[t], std::abs(high[t] - close[t - 1]),
                                  std::abs(low[t] - close[t - 1])});
            }
            double str = tr.segment(1, p).sum();
            double spdm = pdm.segment(1, p).sum();
            double sndm = ndm.segment(1, p).sum();
            Vec dx = Vec::Constant(T, undefined_value());
            auto dx_at = [](double s_tr, double s_p, double s_n) {
                if (s_tr == 0) return 0.0;
                double pdi = 100.0 * s_p / s_tr, ndi = 100.0 * s_n / s_tr;
                double den = pdi + ndi;
                return den == 0 ? 0.0 : 100.0 * std::abs(pdi - ndi) / den;
            };
            dx[p] = dx_at(str, spdm, sndm);
            for (Index t = p + 1; t < T; ++t) {
                str = str - str / p + tr[t];
                spdm = spdm - spdm / p + pdm[t];
                sndm = sndm - sndm / p + ndm[t];
                dx[t] = dx_at(str, spdm, sndm);
            }
            double adx = dx.segment(p, p).mean();
            ts.adx[2 * p - 1] = adx;
            for (Index t = 2 * p; t < T; ++t) {
                adx = (adx * (p - 1) + dx[t]) / p;
                ts.adx[t] = adx;
            }
        }
    }
    return ts;
}

void dump_indicator_csv(const std::string& path, const data::Universe& u,
                        const std::string& ticker, const RsrsSeries& rsrs,
                        double rs_buy, double rs_sell) {
    (void)ticker;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("dump_indicator_csv: cannot open " + path);
    out << "date,beta,r2,std,cor,rightdev,signal\n";
    char buf[256];
    for (Index t = 0; t < rsrs.beta.size(); ++t) {
        auto cell = [&](double v) {
            if (!defined(v)) return std::string();
            char b[48];
            std::snprintf(b, sizeof b, "%.10g", v);
            return std::string(b);
        };
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%s,%s,%s\n",
                      format_date(u.calendar[t]).c_str(), cell(rsrs.beta[t]).c_str(),
                      cell(rsrs.r2[t]).c_str(), cell(rsrs.std[t]).c_str(),
                      cell(rsrs.cor[t]).c_str(), cell(rsrs.rightdev[t]).c_str(),
                      signal_name(rsrs_signal(rsrs.rightdev[t], rs_buy, rs_sell)));
        out << buf;
    }
}

}  // namespace quant::indicators
