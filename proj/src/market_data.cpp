#include "quant/market_data.hpp"

#include <curl/curl.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "quant/rng.hpp"

namespace fs = std::filesystem;

namespace quant::data {

void validate_bar(const Bar& b, const std::string& context) {
    if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0))
        fail(context + ": non-positive price");
    if (b.volume < 0) fail(context + ": negative volume");
    if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close))
        fail(context + ": OHLC invariant violated (low <= min(open,close) <= max <= high)");
}

static std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

static double parse_real(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) fail(context + ": trailing junk in number '" + s + "'");
        return v;
    } catch (const QuantError&) {
        throw;
    } catch (...) {
        fail(context + ": cannot parse number '" + s + "'");
    }
}

static const char* kHeader = "date,ticker,open,high,low,close,volume";

static std::vector<Bar> parse_bars(const std::string& text,
                                   const std::string& context) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(context + ": empty input");
    {
        std::string hdr = line;
        if (!hdr.empty() && hdr.back() == '\r') hdr.pop_back();
        if (hdr != kHeader)
            fail(context + ": expected header '" + std::string(kHeader) + "', got '" + hdr + "'");
    }
    std::vector<Bar> bars;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_fields(line);
        std::string where = context + " line " + std::to_string(lineno);
        if (f.size() != 7) fail(where + ": expected 7 columns, got " + std::to_string(f.size()));
        Bar b;
        b.date = parse_date(f[0]);
        b.ticker = f[1];
        if (b.ticker.empty()) fail(where + ": empty ticker");
        b.open = parse_real(f[2], where);
        b.high = parse_real(f[3], where);
        b.low = parse_real(f[4], where);
        b.close = parse_real(f[5], where);
        b.volume = parse_real(f[6], where);
        validate_bar(b, where + " (" + format_date(b.date) + " " + b.ticker + ")");
        bars.push_back(std::move(b));
    }
    return bars;
}

PriceSeries parse_series_csv(const std::string& text, const std::string& context) {
    auto bars = parse_bars(text, context);
    if (bars.empty()) fail(context + ": no data rows");
    PriceSeries s;
    s.ticker = bars.front().ticker;
    for (auto& b : bars) {
        if (b.ticker != s.ticker)
            fail(context + ": multiple tickers in single-series payload");
    }
    std::sort(bars.begin(), bars.end(),
              [](const Bar& a, const Bar& b) { return a.date < b.date; });
    for (size_t i = 1; i < bars.size(); ++i)
        if (bars[i].date == bars[i - 1].date)
            fail(context + ": duplicate date " + format_date(bars[i].date));
    s.bars = std::move(bars);
    return s;
}

Universe align(std::vector<PriceSeries> series) {
    require(!series.empty(), "align: no series");
    std::sort(series.begin(), series.end(),
              [](const PriceSeries& a, const PriceSeries& b) { return a.ticker < b.ticker; });
    for (size_t i = 1; i < series.size(); ++i)
        if (series[i].ticker == series[i - 1].ticker)
            fail("align: duplicate ticker " + series[i].ticker);

    std::map<Date, int> counts;
    for (const auto& s : series)
        for (const auto& b : s.bars) counts[b.date]++;
    std::vector<Date> calendar;
    for (auto& [d, c] : counts)
        if (c == static_cast<int>(series.size())) calendar.push_back(d);
    if (calendar.empty()) fail("align: no common dates across tickers");

    std::map<Date, Index> pos;
    for (Index t = 0; t < static_cast<Index>(calendar.size()); ++t)
        pos[calendar[t]] = t;

    Universe u;
    const Index T = static_cast<Index>(calendar.size());
    const Index D = static_cast<Index>(series.size());
    u.calendar = calendar;
    u.open.resize(T, D);
    u.high.resize(T, D);
    u.low.resize(T, D);
    u.close.resize(T, D);
    u.volume.resize(T, D);
    for (Index j = 0; j < D; ++j) {
        u.tickers.push_back(series[j].ticker);
        for (const auto& b : series[j].bars) {
            auto it = pos.find(b.date);
            if (it == pos.end()) continue;
            Index t = it->second;
            u.open(t, j) = b.open;
            u.high(t, j) = b.high;
            u.low(t, j) = b.low;
            u.close(t, j) = b.close;
            u.volume(t, j) = b.volume;
        }
    }
    return u;
}

Universe load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("load_csv: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto bars = parse_bars(ss.str(), path);
    if (bars.empty()) fail(path + ": no data rows");

    std::map<std::string, PriceSeries> by_ticker;
    for (auto& b : bars) {
        auto& s = by_ticker[b.ticker];
        s.ticker = b.ticker;
        s.bars.push_back(std::move(b));
    }
    std::vector<PriceSeries> series;
    for (auto& [tk, s] : by_ticker) {
        std::sort(s.bars.begin(), s.bars.end(),
                  [](const Bar& a, const Bar& b) { return a.date < b.date; });
        for (size_t i = 1; i < s.bars.size(); ++i)
            if (s.bars[i].date == s.bars[i - 1].date)
                fail(path + ": duplicate (" + format_date(s.bars[i].date) + ", " + tk + ")");
        series.push_back(std::move(s));
    }
    return align(std::move(series));
}

void write_csv(const std::string& path, const Universe& u) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("write_csv: cannot open " + path);
    out << kHeader << "\n";
    char buf[512];
    for (Index t = 0; t < u.days(); ++t)
        for (Index j = 0; j < u.stocks(); ++j) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                          format_date(u.calendar[t]).c_str(), u.tickers[j].c_str(),
                          u.open(t, j), u.high(t, j), u.low(t, j), u.close(t, j),
                          u.volume(t, j));
            out << buf;
        }
}

std::vector<PriceSeries> to_series(const Universe& u) {
    std::vector<PriceSeries> out;
    for (Index j = 0; j < u.stocks(); ++j) {
        PriceSeries s;
        s.ticker = u.tickers[j];
        for (Index t = 0; t < u.days(); ++t) {
            Bar b;
            b.date = u.calendar[t];
            b.ticker = s.ticker;
            b.open = u.open(t, j);
            b.high = u.high(t, j);
            b.low = u.low(t, j);
            b.close = u.close(t, j);
            b.volume = u.volume(t, j);
            s.bars.push_back(std::move(b));
        }
        out.push_back(std::move(s));
    }
    return out;
}

static Universe take_rows(const Universe& u, Index begin, Index end) {
    Universe out;
    out.tickers = u.tickers;
    out.calendar.assign(u.calendar.begin() + begin, u.calendar.begin() + end);
    const Index n = end - begin, D = u.stocks();
    out.open = u.open.middleRows(begin, n);
    out.high = u.high.middleRows(begin, n);
    out.low = u.low.middleRows(begin, n);
    out.close = u.close.middleRows(begin, n);
    out.volume = u.volume.middleRows(begin, n);
    (void)D;
    return out;
}

std::tuple<Universe, Universe, Universe> split_by_dates(const Universe& u,
                                                        Date train_end,
                                                        Date val_end) {
    require(train_end < val_end, "split_by_dates: train_end must precede val_end");
    require(u.days() >= 1, "split_by_dates: empty universe");
    if (train_end < u.calendar.front() || val_end > u.calendar.back())
        fail("split_by_dates: boundary outside calendar span");

    auto upper = [&](Date d) {
        return static_cast<Index>(
            std::upper_bound(u.calendar.begin(), u.calendar.end(), d) -
            u.calendar.begin());
    };
    Index i1 = upper(train_end), i2 = upper(val_end);
    if (i1 == 0 || i2 == i1 || i2 == u.days())
        fail("split_by_dates: a split would be empty");
    return {take_rows(u, 0, i1), take_rows(u, i1, i2), take_rows(u, i2, u.days())};
}

std::vector<std::string> rank_by_turnover(const Universe& u, Index window,
                                          Index k) {
    require(window >= 1 && window <= u.days(), "rank_by_turnover: window out of range");
    require(k >= 1 && k <= u.stocks(), "rank_by_turnover: k out of range");
    const Index T = u.days(), D = u.stocks();
    std::vector<std::pair<double, std::string>> scored;
    for (Index j = 0; j < D; ++j) {
        double score = 0;
        for (Index t = T - window; t < T; ++t) {
            Index lo = std::max<Index>(0, t - 19);
            double mean_vol = u.volume.col(j).segment(lo, t - lo + 1).mean();
            score += mean_vol > 0 ? u.volume(t, j) / mean_vol : 0.0;
        }
        scored.emplace_back(score / static_cast<double>(window), u.tickers[j]);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (Index j = 0; j < k; ++j) out.push_back(scored[j].second);
    return out;
}

Universe select_tickers(const Universe& u, const std::vector<std::string>& tickers) {
    require(!tickers.empty(), "select_tickers: empty selection");
    auto series = to_series(u);
    std::vector<PriceSeries> keep;
    for (const auto& tk : tickers) {
        auto it = std::find_if(series.begin(), series.end(),
                               [&](const PriceSeries& s) { return s.ticker == tk; });
        if (it == series.end()) fail("select_tickers: unknown ticker " + tk);
        keep.push_back(*it);
    }
    return align(std::move(keep));
}

Universe synthetic_universe(std::uint64_t seed, Index d, Index t, double drift,
                            double vol) {
    require(d >= 1, "synthetic_universe: d >= 1");
    require(t >= 2, "synthetic_universe: t >= 2");
    require(vol >= 0, "synthetic_universe: vol >= 0");

    Universe u;
    const Date start = make_date(2015, 1, 1);
    for (Index i = 0; i < t; ++i) u.calendar.push_back(start + static_cast<int>(i));
    u.open.resize(t, d);
    u.high.resize(t, d);
    u.low.resize(t, d);
    u.close.resize(t, d);
    u.volume.resize(t, d);

    Rng master(seed);
    for (Index j = 0; j < d; ++j) {
        char name[16];
        std::snprintf(name, sizeof name, "S%02d", static_cast<int>(j));
        u.tickers.emplace_back(name);
        Rng path = master.fork(hash_label("path") + static_cast<std::uint64_t>(j));
        Rng band = master.fork(hash_label("band") + static_cast<std::uint64_t>(j));
        Rng volr = master.fork(hash_label("volume") + static_cast<std::uint64_t>(j));

        double close = 100.0;
        for (Index i = 0; i < t; ++i) {
            if (i > 0)
                close *= std::exp((drift - 0.5 * vol * vol) + vol * path.normal());
            double band_u = std::abs(band.uniform(-0.01, 0.01));
            double high = close * (1.0 + band_u);
            double low = close * (1.0 - band_u);
            double open = i == 0 ? close
                                 : std::clamp(u.close(i - 1, j), low, high);
            u.open(i, j) = open;
            u.high(i, j) = high;
            u.low(i, j) = low;
            u.close(i, j) = close;
            u.volume(i, j) = 1e6 * std::exp(0.2 * volr.normal());
        }
    }
    return u;
}

static size_t curl_sink(char* ptr, size_t size, size_t nmemb, void* userdata) {
    auto* s = static_cast<std::string*>(userdata);
    s->append(ptr, size * nmemb);
    return size * nmemb;
}

PriceSeries fetch_remote(const std::string& ticker, Date start, Date end,
                         const std::string& endpoint,
                         const std::string& cache_dir) {
    require(!ticker.empty(), "fetch_remote: empty ticker");
    if (end < start) fail("fetch_remote: empty range (end before start)");

    fs::path cache = fs::path(cache_dir) / (ticker + ".csv");
    if (fs::exists(cache)) {
        std::ifstream in(cache, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        auto s = parse_series_csv(ss.str(), cache.string());
        PriceSeries filtered{s.ticker, {}};
        for (auto& b : s.bars)
            if (b.date >= start && b.date <= end) filtered.bars.push_back(b);
        if (filtered.bars.empty())
            fail("fetch_remote: cache for " + ticker + " has no bars in range");
        return filtered;
    }

    std::string url = endpoint;
    url += (url.find('?') == std::string::npos ? "?" : "&");
    url += "ticker=" + ticker + "&start=" + format_date(start) +
           "&end=" + format_date(end);

    CURL* curl = curl_easy_init();
    if (!curl) fail("fetch_remote: curl init failed");
    std::string body;
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, curl_sink);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, &body);
    curl_easy_setopt(curl, CURLOPT_TIMEOUT, 30L);
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    CURLcode rc = curl_easy_perform(curl);
    long status = 0;
    curl_easy_getinfo(curl, CURLINFO_RESPONSE_CODE, &status);
    curl_easy_cleanup(curl);

    if (rc != CURLE_OK)
        fail("fetch_remote: retryable transport error for " + ticker + ": " +
             curl_easy_strerror(rc));
    if (status != 200)
        fail("fetch_remote: retryable HTTP " + std::to_string(status) + " for " + ticker);

    auto s = parse_series_csv(body, "fetch:" + ticker);
    if (s.ticker != ticker)
        fail("fetch_remote: payload ticker mismatch (" + s.ticker + ")");

    fs::create_directories(cache_dir);
    std::ofstream out(cache, std::ios::binary);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.close();

    PriceSeries filtered{s.ticker, {}};
    for (auto& b : s.bars)
        if (b.date >= start && b.date <= end) filtered.bars.push_back(b);
    if (filtered.bars.empty()) fail("fetch_remote: no bars in requested range");
    return filtered;
}

}  // namespace quant::data
