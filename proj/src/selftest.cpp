#include "quant/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "quant/backtest.hpp"
#include "quant/indicators.hpp"
#include "quant/market_data.hpp"
#include "quant/nn.hpp"
#include "quant/rng.hpp"
#include "quant/trading_env.hpp"

namespace quant::selftest {

namespace {

struct Check {
    std::string name;
    double tolerance;
    double max_err;
    bool pass;
};

double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

// x=[1,2,3,4], y=[2,2.9,4.2,4.9]: hand-run normal equations give
// beta = 5/5 = 1, alpha = 3.5 - 2.5 = 1, r2 = 1 - 0.06/5.06.
Check ols_closed_form() {
    Vec x(4), y(4);
    x << 1, 2, 3, 4;
    y << 2, 2.9, 4.2, 4.9;
    auto fit = indicators::ols_fit(y, x);
    double err = std::max({std::fabs(fit.beta - 1.0), std::fabs(fit.alpha - 1.0),
                           std::fabs(fit.r2 - 0.9881422924901185)});
    return {"ols-closed-form", 1e-12, err, err < 1e-12};
}

Check drawdown_brute_force() {
    Rng rng(424242);
    double worst = 0;
    for (int c = 0; c < 20; ++c) {
        Vec a(300);
        a[0] = 100;
        for (Index t = 1; t < a.size(); ++t)
            a[t] = a[t - 1] * std::exp(0.02 * rng.normal());
        double slow = 0;  // O(n^2) peak/trough scan
        for (Index i = 0; i < a.size(); ++i)
            for (Index j = 0; j <= i; ++j)
                slow = std::min(slow, a[i] / a[j] - 1.0);
        worst = std::max(worst, std::fabs(backtest::max_drawdown(a) - slow));
    }
    return {"max-drawdown-vs-brute-force", 1e-12, worst, worst < 1e-12};
}

Check mlp_gradient_check() {
    Rng rng(7);
    auto net = nn::make_mlp<double>({3, 8, 2}, rng);
    Mat x(3, 4), target(2, 4);
    for (Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    for (Index i = 0; i < target.size(); ++i) target(i) = rng.normal();

    auto loss = [&](const nn::Mlp<double>& m) {
        Mat out = nn::forward(m, x);
        return 0.5 * (out - target).squaredNorm();
    };
    nn::ForwardCache<double> cache;
    Mat out = nn::forward(net, x, &cache);
    auto grads = nn::backward(net, cache, Mat(out - target));

    const double h = 1e-5;
    double worst = 0;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        auto fd_one = [&](double& p, double analytic) {
            const double keep = p;
            p = keep + h;
            double up = loss(net);
            p = keep - h;
            double dn = loss(net);
            p = keep;
            worst = std::max(worst, rel_err(analytic, (up - dn) / (2 * h)));
        };
        auto& lay = net.layers[l];
        for (Index r = 0; r < lay.w.rows(); ++r)
            for (Index c = 0; c < lay.w.cols(); ++c)
                fd_one(lay.w(r, c), grads.layers[l].w(r, c));
        for (Index r = 0; r < lay.b.size(); ++r)
            fd_one(lay.b[r], grads.layers[l].b[r]);
    }
    return {"mlp-gradient-vs-finite-diff", 1e-4, worst, worst < 1e-4};
}

Check nll_gradient_check() {
    Rng rng(11);
    Mat mean(3, 4), log_std(3, 4), target(3, 4);
    for (Index i = 0; i < mean.size(); ++i) {
        mean(i) = rng.normal();
        log_std(i) = 0.3 * rng.normal();
        target(i) = rng.normal();
    }
    Mat dmean, dls;
    nn::gaussian_nll_grad(mean, log_std, target, dmean, dls);

    const double h = 1e-5;
    double worst = 0;
    auto fd = [&](Mat& m, const Mat& analytic) {
        for (Index i = 0; i < m.size(); ++i) {
            const double keep = m(i);
            m(i) = keep + h;
            double up = nn::gaussian_nll(mean, log_std, target);
            m(i) = keep - h;
            double dn = nn::gaussian_nll(mean, log_std, target);
            m(i) = keep;
            worst = std::max(worst, rel_err(analytic(i), (up - dn) / (2 * h)));
        }
    };
    fd(mean, dmean);
    fd(log_std, dls);
    return {"gaussian-nll-gradient", 1e-4, worst, worst < 1e-4};
}

// Replays random executed actions with scalar arithmetic and checks balance,
// holdings, cost and reward against the vectorized step.
Check accounting_replay() {
    auto u = data::synthetic_universe(99, 2, 140, 5e-4, 0.02);
    auto slice = env::build_market_slice(u, 10, 30);
    env::EnvConfig cfg;
    cfg.initial_balance = 1e5;
    env::EnvState s = env::reset(slice, cfg);

    Rng rng(3);
    double balance = cfg.initial_balance;
    std::vector<long> holdings(static_cast<size_t>(slice.stocks()), 0);
    double worst = 0;
    while (true) {
        env::Action a;
        a.shares.resize(slice.stocks());
        for (Index j = 0; j < slice.stocks(); ++j)
            a.shares[j] = static_cast<int>(rng.bounded(2 * cfg.hmax + 1)) - cfg.hmax;
        auto res = env::step(slice, cfg, s, a);

        double asset_before = balance;
        for (Index j = 0; j < slice.stocks(); ++j)
            asset_before += s.prices[j] * static_cast<double>(holdings[static_cast<size_t>(j)]);
        double cost = 0, traded = 0;
        for (Index j = 0; j < slice.stocks(); ++j) {
            double px = s.prices[j];
            int ex = res.executed[j];
            traded += px * ex;
            cost += cfg.cost_percentage * px * std::fabs(ex);
            holdings[static_cast<size_t>(j)] += ex;
            if (holdings[static_cast<size_t>(j)] < 0) return {"accounting-replay", 1e-9, 1, false};
        }
        balance -= traded + cost;
        double asset_after = balance;
        for (Index j = 0; j < slice.stocks(); ++j)
            asset_after += res.next_state.prices[j] *
                           static_cast<double>(holdings[static_cast<size_t>(j)]);
        double reward = (asset_after - asset_before) / asset_before * 100.0;

        worst = std::max(worst, rel_err(balance, res.next_state.balance));
        worst = std::max(worst, rel_err(cost, res.cost));
        worst = std::max(worst, rel_err(reward, res.reward));
        for (Index j = 0; j < slice.stocks(); ++j)
            worst = std::max(worst,
                             std::fabs(static_cast<double>(holdings[static_cast<size_t>(j)]) -
                                       res.next_state.holdings[j]));
        s = res.next_state;
        if (res.done) break;
    }
    return {"accounting-replay", 1e-9, worst, worst < 1e-9};
}

}  // namespace

bool run(std::ostream& os) {
    std::vector<Check> checks{ols_closed_form(), drawdown_brute_force(),
                              mlp_gradient_check(), nll_gradient_check(),
                              accounting_replay()};
    bool all = true;
    os << "selftest: " << checks.size() << " oracle checks\n";
    char buf[160];
    for (const auto& c : checks) {
        std::snprintf(buf, sizeof buf, "  [%s] %-30s tol %-8g max err %g\n",
                      c.pass ? "PASS" : "FAIL", c.name.c_str(), c.tolerance,
                      c.max_err);
        os << buf;
        all = all && c.pass;
    }
    os << (all ? "selftest: all checks passed\n" : "selftest: FAILURES\n");
    return all;
}

}  // namespace quant::selftest
