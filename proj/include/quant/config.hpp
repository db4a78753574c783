#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "quant/agents.hpp"
#include "quant/core.hpp"
#include "quant/dates.hpp"
#include "quant/trading_env.hpp"

namespace quant::config {

struct DataConfig {
    std::string source = "synthetic";  // synthetic | csv | fetch
    std::string csv;                   // long-format OHLCV file
    std::string cache_dir = "cache";   // QUANT_CACHE_DIR overrides
    std::string endpoint;              // remote CSV endpoint (source = fetch)
    std::vector<std::string> tickers;
    Date fetch_start{}, fetch_end{};
    Date train_end{}, val_end{};       // split boundaries (inclusive ends)
    int universe_size = 0;             // 0 = keep every ticker
    int turnover_window = 20;
    std::uint64_t synthetic_seed = 12345;  // dataset stays fixed across --seed
    int synthetic_days = 800;
    int synthetic_stocks = 4;
    double synthetic_drift = 5e-4;
    double synthetic_vol = 0.02;
};

struct BacktestConfig {
    int seeds = 10;
    double risk_free = 0.0;
    std::string baseline = "index";  // ticker symbol, or equal-weight "index"
};

struct RunConfig {
    std::uint64_t seed = 1;      // master seed; components fork child streams
    std::string variant = "MBPO";
    std::string out = "out";
    DataConfig data;
    Index rsrs_l = 10;           // [indicators] l
    Index rsrs_m = 300;          // [indicators] m
    env::EnvConfig env;
    agents::TrainConfig train;   // .variant is overwritten from `variant`
    BacktestConfig backtest;
};

// TOML-subset: [section] headers, key = value pairs, # comments, quoted
// strings, numbers, true/false, YYYY-MM-DD dates and [a, b, ...] lists.
// Unknown sections or keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical rendering; parse(serialize(c)) reproduces c exactly (doubles are
// written with 17 significant digits).
std::string serialize_config(const RunConfig& c);

}  // namespace quant::config
