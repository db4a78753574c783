#include "quant/backtest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace quant::backtest {

MetricsReport compute_metrics(const EquityCurve& curve, double risk_free) {
    require(curve.asset.size() >= 2, "compute_metrics: need at least 2 points");
    require((curve.asset.array() > 0).all(), "compute_metrics: non-positive asset");
    MetricsReport m;
    m.periods = curve.asset.size() - 1;
    if (!curve.dates.empty()) {
        m.period_start = format_date(curve.dates.front());
        m.period_end = format_date(curve.dates.back());
    }
    m.annualized_return = annualized_return(curve.asset);
    m.cumulative_return = cumulative_return(curve.asset);
    m.max_drawdown = max_drawdown(curve.asset);
    Vec rets = daily_returns(curve.asset);
    if (rets.size() >= 2) {
        double vol = annualized_volatility(rets);
        m.annualized_volatility = vol;
        if (vol > 0) m.sharpe = sharpe(rets, risk_free);
    }
    if (*m.max_drawdown < 0) m.calmar = calmar(curve.asset);
    if (curve.asset.size() >= 3) m.stability = stability(curve.asset);
    return m;
}

EquityCurve baseline_curve(const std::vector<Date>& dates, const Vec& index,
                           double initial_balance, const std::string& name) {
    require(static_cast<Index>(dates.size()) == index.size(),
            "baseline_curve: dates/index misaligned");
    require(index.size() >= 1 && (index.array() > 0).all(),
            "baseline_curve: index must be positive");
    EquityCurve c;
    c.name = name;
    c.dates = dates;
    c.asset = initial_balance * (index.array() / index[0]).matrix();
    c.rewards = Vec::Zero(index.size());
    c.costs = Vec::Zero(index.size());
    return c;
}

static std::string sig6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

static json metrics_jobj(const MetricsReport& m) {
    json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v && std::isfinite(*v))
            j[key] = json::parse(sig6(*v));  // 6 significant digits, numeric
        else
            j[key] = nullptr;
    };
    put("annualized_return", m.annualized_return);
    put("cumulative_return", m.cumulative_return);
    put("annualized_volatility", m.annualized_volatility);
    put("sharpe", m.sharpe);
    put("calmar", m.calmar);
    put("stability", m.stability);
    put("max_drawdown", m.max_drawdown);
    j["period_start"] = m.period_start;
    j["period_end"] = m.period_end;
    j["periods"] = m.periods;
    return j;
}

static void write_equity_csv(const std::string& path, const EquityCurve& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("report: cannot open " + path);
    out << "date,asset,reward,cost\n";
    char buf[160];
    for (Index t = 0; t < c.asset.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%s\n",
                      format_date(c.dates[static_cast<size_t>(t)]).c_str(),
                      sig6(c.asset[t]).c_str(), sig6(c.rewards[t]).c_str(),
                      sig6(c.costs[t]).c_str());
        out << buf;
    }
}

EquityCurve read_equity_csv(const std::string& path, const std::string& name) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("read_equity_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) fail(path + ": empty file");
    std::vector<Date> dates;
    std::vector<double> asset, reward, cost;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string d, a, r, c;
        std::getline(row, d, ',');
        std::getline(row, a, ',');
        std::getline(row, r, ',');
        std::getline(row, c, ',');
        dates.push_back(parse_date(d));
        asset.push_back(std::stod(a));
        reward.push_back(std::stod(r));
        cost.push_back(std::stod(c));
    }
    EquityCurve out;
    out.name = name;
    out.dates = dates;
    out.asset = Eigen::Map<Vec>(asset.data(), static_cast<Index>(asset.size()));
    out.rewards = Eigen::Map<Vec>(reward.data(), static_cast<Index>(reward.size()));
    out.costs = Eigen::Map<Vec>(cost.data(), static_cast<Index>(cost.size()));
    return out;
}

// July-to-July windows covering the span of the given curves.
static std::vector<std::pair<Date, Date>> yearly_windows(
    const std::vector<EquityCurve>& curves) {
    Date lo = curves.front().dates.front(), hi = curves.front().dates.back();
    for (const auto& c : curves) {
        lo = std::min(lo, c.dates.front());
        hi = std::max(hi, c.dates.back());
    }
    int y0, m0, d0, y1, m1, d1;
    civil_from_date(lo, y0, m0, d0);
    civil_from_date(hi, y1, m1, d1);
    std::vector<Date> bounds{lo};
    for (int y = y0; y <= y1 + 1; ++y) {
        Date july = make_date(y, 7, 1);
        if (july > lo && july < hi) bounds.push_back(july);
    }
    bounds.push_back(hi);
    std::vector<std::pair<Date, Date>> out;
    for (size_t i = 0; i + 1 < bounds.size(); ++i)
        out.emplace_back(bounds[i], bounds[i + 1]);
    return out;
}

std::map<std::string, MetricsReport> report(const std::vector<EquityCurve>& curves,
                                            const ReportOptions& opt) {
    require(!curves.empty(), "report: need at least one curve");
    std::map<std::string, MetricsReport> out;
    for (const auto& c : curves) {
        require(!c.name.empty(), "report: unnamed curve");
        out[c.name] = compute_metrics(c, opt.risk_free);
    }
    for (const auto& [name, m] : opt.extra_rows) {
        require(!out.count(name), "report: duplicate row " + name);
        out[name] = m;
    }
    if (opt.out_dir.empty()) return out;

    fs::create_directories(opt.out_dir);
    {
        json j;
        for (const auto& [name, m] : out) j[name] = metrics_jobj(m);
        std::ofstream f(fs::path(opt.out_dir) / "metrics.json", std::ios::binary);
        f << j.dump(1) << "\n";
    }
    for (const auto& c : curves)
        write_equity_csv((fs::path(opt.out_dir) / ("equity_" + c.name + ".csv")).string(), c);

    {
        std::ofstream f(fs::path(opt.out_dir) / "yearly.csv", std::ios::binary);
        f << "window";
        for (const auto& c : curves) f << "," << c.name;
        f << "\n";
        for (auto [a, b] : yearly_windows(curves)) {
            f << format_date(a) << ".." << format_date(b);
            for (const auto& c : curves) {
                // sub-curve clipped to the window
                std::vector<double> vals;
                for (size_t t = 0; t < c.dates.size(); ++t)
                    if (c.dates[t] >= a && c.dates[t] <= b) vals.push_back(c.asset[static_cast<Index>(t)]);
                if (vals.size() >= 2) {
                    Vec sub = Eigen::Map<Vec>(vals.data(), static_cast<Index>(vals.size()));
                    f << "," << sig6(annualized_return(sub));
                } else {
                    f << ",n/a";
                }
            }
            f << "\n";
        }
    }
    return out;
}

}  // namespace quant::backtest
