#include "quant/cli.hpp"

#include <boost/program_options.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "quant/agents.hpp"
#include "quant/backtest.hpp"
#include "quant/config.hpp"
#include "quant/market_data.hpp"
#include "quant/rng.hpp"
#include "quant/selftest.hpp"
#include "quant/trading_env.hpp"

namespace quant::cli {

namespace fs = std::filesystem;
namespace po = boost::program_options;

namespace {

// Same splitmix derivation Rng::fork uses, exposed for the seed fan-out:
// every pipeline stage gets an independent labeled child of the master seed.
std::uint64_t child_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t s = master ^ (hash_label(label) + 0x9E3779B97F4A7C15ULL);
    return splitmix64(s);
}

data::Universe load_universe(const config::RunConfig& cfg) {
    const auto& d = cfg.data;
    data::Universe u;
    if (d.source == "synthetic") {
        u = data::synthetic_universe(d.synthetic_seed, d.synthetic_stocks,
                                     d.synthetic_days, d.synthetic_drift,
                                     d.synthetic_vol);
    } else if (d.source == "csv") {
        require(!d.csv.empty(), "data.csv path not set");
        u = data::load_csv(d.csv);
        if (!d.tickers.empty()) u = data::select_tickers(u, d.tickers);
    } else {  // fetch
        require(!d.endpoint.empty(), "data.endpoint not set");
        require(!d.tickers.empty(), "data.tickers not set");
        require(d.fetch_start < d.fetch_end, "fetch_start must precede fetch_end");
        std::vector<data::PriceSeries> series;
        for (const auto& t : d.tickers)
            series.push_back(data::fetch_remote(t, d.fetch_start, d.fetch_end,
                                                d.endpoint, d.cache_dir));
        u = data::align(std::move(series));
    }
    if (cfg.data.universe_size > 0 &&
        cfg.data.universe_size < static_cast<int>(u.tickers.size())) {
        auto keep = data::rank_by_turnover(u, cfg.data.turnover_window,
                                           cfg.data.universe_size);
        u = data::select_tickers(u, keep);
    }
    return u;
}

struct Splits {
    env::MarketSlice train, val, test;
};

// Indicators are computed over the full history once; the split boundaries
// then carve the finished slice so validation/test days keep their trailing
// context.
Splits make_splits(const config::RunConfig& cfg, const data::Universe& u) {
    require(cfg.data.train_end.serial != 0 && cfg.data.val_end.serial != 0,
            "data.train_end / data.val_end not set");
    require(cfg.data.train_end < cfg.data.val_end,
            "train_end must precede val_end");
    auto slice = env::build_market_slice(u, cfg.rsrs_l, cfg.rsrs_m);
    Index i_train = 0, i_val = 0;
    for (Index t = 0; t < slice.days(); ++t) {
        if (slice.dates[static_cast<size_t>(t)] <= cfg.data.train_end) i_train = t + 1;
        if (slice.dates[static_cast<size_t>(t)] <= cfg.data.val_end) i_val = t + 1;
    }
    require(i_train >= 2, "train split needs at least 2 usable days");
    require(i_val - i_train >= 2, "validation split needs at least 2 days");
    require(slice.days() - i_val >= 2, "test split needs at least 2 days");
    Splits s;
    s.train = env::slice_range(slice, 0, i_train);
    s.val = env::slice_range(slice, i_train, i_val);
    s.test = env::slice_range(slice, i_val, slice.days());
    return s;
}

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void print_metrics(std::ostream& os, const std::string& name,
                   const backtest::MetricsReport& m) {
    auto cell = [](const std::optional<double>& v) {
        return v ? fmt6(*v) : std::string("n/a");
    };
    os << name << ": annualized_return=" << cell(m.annualized_return)
       << " cumulative_return=" << cell(m.cumulative_return)
       << " volatility=" << cell(m.annualized_volatility)
       << " sharpe=" << cell(m.sharpe) << " calmar=" << cell(m.calmar)
       << " stability=" << cell(m.stability)
       << " max_drawdown=" << cell(m.max_drawdown) << "\n";
}

backtest::MetricsReport mean_metrics(
    const std::vector<backtest::MetricsReport>& rows) {
    require(!rows.empty(), "mean_metrics: no rows");
    backtest::MetricsReport out = rows.front();
    auto avg = [&](std::optional<double> backtest::MetricsReport::*field) {
        double sum = 0;
        for (const auto& r : rows) {
            if (!(r.*field)) {
                out.*field = std::nullopt;
                return;
            }
            sum += *(r.*field);
        }
        out.*field = sum / static_cast<double>(rows.size());
    };
    avg(&backtest::MetricsReport::annualized_return);
    avg(&backtest::MetricsReport::cumulative_return);
    avg(&backtest::MetricsReport::annualized_volatility);
    avg(&backtest::MetricsReport::sharpe);
    avg(&backtest::MetricsReport::calmar);
    avg(&backtest::MetricsReport::stability);
    avg(&backtest::MetricsReport::max_drawdown);
    return out;
}

int cmd_fetch(const config::RunConfig& cfg) {
    const auto& d = cfg.data;
    require(!d.endpoint.empty(), "fetch: data.endpoint not set");
    require(!d.tickers.empty(), "fetch: data.tickers not set");
    require(d.fetch_start < d.fetch_end, "fetch: fetch_start must precede fetch_end");
    std::vector<std::string> failed;
    for (const auto& t : d.tickers) {
        try {
            auto series = data::fetch_remote(t, d.fetch_start, d.fetch_end,
                                             d.endpoint, d.cache_dir);
            std::cout << t << ": " << series.bars.size() << " rows\n";
        } catch (const std::exception& e) {
            std::cerr << t << ": " << e.what() << "\n";
            failed.push_back(t);
        }
    }
    if (!failed.empty()) {
        std::cerr << "fetch failed for:";
        for (const auto& t : failed) std::cerr << " " << t;
        std::cerr << "\n";
        return 1;
    }
    std::cout << "cached " << d.tickers.size() << " tickers in " << d.cache_dir
              << "\n";
    return 0;
}

int cmd_train(const config::RunConfig& cfg) {
    auto u = load_universe(cfg);
    auto splits = make_splits(cfg, u);

    agents::TrainConfig tc = cfg.train;
    tc.variant = agents::variant_from_name(cfg.variant);
    auto trained = agents::train(tc, splits.train, cfg.env, cfg.seed);

    fs::create_directories(cfg.out);
    const std::string checkpoint = (fs::path(cfg.out) / "checkpoint.json").string();
    const std::string history = (fs::path(cfg.out) / "history.csv").string();
    {
        std::ofstream f(checkpoint, std::ios::binary);
        if (!f) fail("train: cannot open " + checkpoint);
        f << agents::agent_to_json(trained);
    }
    agents::write_history_csv(history, trained.history);

    auto curve = agents::evaluate(trained, splits.val, cfg.env, "validation");
    auto metrics = backtest::compute_metrics(curve, cfg.backtest.risk_free);
    std::cout << "trained " << cfg.variant << " for " << tc.epochs << " epochs ("
              << trained.sac_update_calls << " sac updates, "
              << trained.cem_plan_calls << " cem plans)\n";
    print_metrics(std::cout, "validation", metrics);
    std::cout << "wrote " << checkpoint << "\nwrote " << history << "\n";
    return 0;
}

int cmd_backtest(const config::RunConfig& cfg) {
    auto u = load_universe(cfg);
    auto splits = make_splits(cfg, u);
    const auto& slice = splits.test;

    const std::string checkpoint = (fs::path(cfg.out) / "checkpoint.json").string();
    std::ifstream f(checkpoint, std::ios::binary);
    if (!f) fail("backtest: missing checkpoint " + checkpoint + " (run train)");
    std::ostringstream buf;
    buf << f.rdbuf();
    auto trained = agents::agent_from_json(buf.str());

    const Index obs_dim =
        env::TradingEnv(slice, cfg.env).observation().size();
    require(trained.agent.obs_dim == obs_dim,
            "backtest: checkpoint/split dimension mismatch (checkpoint " +
                std::to_string(trained.agent.obs_dim) + ", split " +
                std::to_string(obs_dim) + ")");

    require(cfg.backtest.seeds >= 1, "backtest.seeds must be >= 1");
    const std::string variant = agents::variant_name(trained.cfg.variant);
    std::vector<backtest::EquityCurve> curves;
    std::vector<backtest::MetricsReport> rows;
    for (int s = 1; s <= cfg.backtest.seeds; ++s) {
        Rng rng(child_seed(cfg.seed, "backtest-" + std::to_string(s)));
        auto curve = agents::evaluate(trained, slice, cfg.env,
                                      variant + "_seed" + std::to_string(s), &rng);
        rows.push_back(backtest::compute_metrics(curve, cfg.backtest.risk_free));
        curves.push_back(std::move(curve));
    }

    Vec index;
    std::string baseline_name;
    if (cfg.backtest.baseline.empty() || cfg.backtest.baseline == "index") {
        // equal-weight basket of normalized closes
        index = Vec::Zero(slice.days());
        for (Index j = 0; j < slice.stocks(); ++j)
            index += slice.close.col(j) / slice.close(0, j);
        index /= static_cast<double>(slice.stocks());
        baseline_name = "baseline_index";
    } else {
        auto it = std::find(slice.tickers.begin(), slice.tickers.end(),
                            cfg.backtest.baseline);
        if (it == slice.tickers.end())
            fail("backtest: baseline ticker '" + cfg.backtest.baseline +
                 "' not in universe");
        index = slice.close.col(it - slice.tickers.begin());
        baseline_name = "baseline_" + cfg.backtest.baseline;
    }
    curves.push_back(backtest::baseline_curve(slice.dates, index,
                                              cfg.env.initial_balance,
                                              baseline_name));

    backtest::ReportOptions opt;
    opt.risk_free = cfg.backtest.risk_free;
    opt.out_dir = cfg.out;
    opt.extra_rows[variant + "_mean"] = mean_metrics(rows);
    auto table = backtest::report(curves, opt);
    for (const auto& [name, m] : table) print_metrics(std::cout, name, m);
    std::cout << "wrote " << (fs::path(cfg.out) / "metrics.json").string() << "\n";
    return 0;
}

int cmd_report(const config::RunConfig& cfg) {
    std::vector<backtest::EquityCurve> curves;
    std::vector<fs::path> files;
    if (fs::is_directory(cfg.out))
        for (const auto& entry : fs::directory_iterator(cfg.out)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("equity_", 0) == 0 && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::string name = p.stem().string().substr(std::string("equity_").size());
        curves.push_back(backtest::read_equity_csv(p.string(), name));
    }
    require(!curves.empty(), "report: no equity_*.csv curves in " + cfg.out);
    backtest::ReportOptions opt;
    opt.risk_free = cfg.backtest.risk_free;
    opt.out_dir = cfg.out;
    auto table = backtest::report(curves, opt);
    for (const auto& [name, m] : table) print_metrics(std::cout, name, m);
    std::cout << "wrote " << (fs::path(cfg.out) / "metrics.json").string() << "\n";
    return 0;
}

void print_usage(std::ostream& os, const po::options_description& opts) {
    os << "usage: quant <fetch|train|backtest|report|selftest> [options]\n"
       << opts;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    po::options_description opts("options");
    opts.add_options()
        ("help,h", "show usage")
        ("config", po::value<std::string>(), "config file (TOML subset)")
        ("seed", po::value<std::uint64_t>(), "master seed override")
        ("variant", po::value<std::string>(), "PETS|MBPO|M2AC|RSPO|RSAC")
        ("out", po::value<std::string>(), "output directory override");
    po::options_description hidden;
    hidden.add_options()("command", po::value<std::string>(), "");
    po::options_description all;
    all.add(opts).add(hidden);
    po::positional_options_description pos;
    pos.add("command", 1);

    po::variables_map vm;
    try {
        po::store(po::command_line_parser(args).options(all).positional(pos).run(),
                  vm);
        po::notify(vm);
    } catch (const po::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        print_usage(std::cerr, opts);
        return 2;
    }
    if (vm.count("help")) {
        print_usage(std::cout, opts);
        return 0;
    }
    if (!vm.count("command")) {
        std::cerr << "error: missing command\n";
        print_usage(std::cerr, opts);
        return 2;
    }
    const std::string command = vm["command"].as<std::string>();
    if (command != "fetch" && command != "train" && command != "backtest" &&
        command != "report" && command != "selftest") {
        std::cerr << "error: unknown command '" << command << "'\n";
        print_usage(std::cerr, opts);
        return 2;
    }

    try {
        if (command == "selftest")
            return selftest::run(std::cout) ? 0 : 1;

        config::RunConfig cfg;
        if (vm.count("config"))
            cfg = config::load_config(vm["config"].as<std::string>());
        if (vm.count("seed")) cfg.seed = vm["seed"].as<std::uint64_t>();
        if (vm.count("variant")) cfg.variant = vm["variant"].as<std::string>();
        if (vm.count("out")) cfg.out = vm["out"].as<std::string>();
        if (const char* cache = std::getenv("QUANT_CACHE_DIR"))
            if (*cache) cfg.data.cache_dir = cache;
        agents::variant_from_name(cfg.variant);  // reject typos up front

        if (command == "fetch") return cmd_fetch(cfg);
        if (command == "train") return cmd_train(cfg);
        if (command == "backtest") return cmd_backtest(cfg);
        return cmd_report(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace quant::cli
