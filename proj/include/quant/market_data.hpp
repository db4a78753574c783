#pragma once
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "quant/core.hpp"
#include "quant/dates.hpp"

namespace quant::data {

struct Bar {
    Date date;
    double open = 0, high = 0, low = 0, close = 0, volume = 0;
    std::string ticker;
};

struct PriceSeries {
    std::string ticker;
    std::vector<Bar> bars;  // strictly increasing dates
};

// Aligned multi-stock panel: every (date, ticker) cell is populated.
struct Universe {
    std::vector<std::string> tickers;  // D symbols; column order of the panels
    std::vector<Date> calendar;        // T dates, strictly increasing
    Mat open, high, low, close, volume;  // each T x D

    Index days() const { return static_cast<Index>(calendar.size()); }
    Index stocks() const { return static_cast<Index>(tickers.size()); }
};

// OHLC sanity used on every ingested row.
void validate_bar(const Bar& b, const std::string& context);

// Inner join on dates across tickers; drops non-common days, never imputes.
Universe align(std::vector<PriceSeries> series);

// Long-format CSV: date,ticker,open,high,low,close,volume (header required).
Universe load_csv(const std::string& path);
PriceSeries parse_series_csv(const std::string& text, const std::string& context);
void write_csv(const std::string& path, const Universe& u);

std::vector<PriceSeries> to_series(const Universe& u);

// Inclusive boundaries: train = (-inf, train_end], val = (train_end, val_end],
// test = (val_end, +inf) intersected with the calendar.
std::tuple<Universe, Universe, Universe> split_by_dates(const Universe& u,
                                                        Date train_end,
                                                        Date val_end);

// k tickers with the LOWEST mean turnover proxy over the trailing window.
// Proxy per day: volume / trailing-20-day mean volume (partial windows at the
// head). Ties break lexicographically.
std::vector<std::string> rank_by_turnover(const Universe& u, Index window,
                                          Index k);

Universe select_tickers(const Universe& u,
                        const std::vector<std::string>& tickers);

// Geometric-Brownian close paths with symmetric high/low bands:
//   close_{t+1} = close_t * exp((drift - vol^2/2) + vol * z_t)
//   high = close * (1 + |u|), low = close * (1 - |u|), u ~ U(-0.01, 0.01)
Universe synthetic_universe(std::uint64_t seed, Index d, Index t, double drift,
                            double vol);

// GET <endpoint>?ticker=T&start=YYYY-MM-DD&end=YYYY-MM-DD returning the same
// CSV schema. Successful payloads are cached verbatim at <cache>/<ticker>.csv;
// a cache hit short-circuits before any network call.
PriceSeries fetch_remote(const std::string& ticker, Date start, Date end,
                         const std::string& endpoint,
                         const std::string& cache_dir);

}  // namespace quant::data
