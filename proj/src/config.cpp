#include "quant/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace quant::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Raw key/value store keyed by "section.key", with strict consumption.
struct Table {
    std::map<std::string, std::string> values;
    std::set<std::string> seen;

    const std::string* find(const std::string& section, const std::string& key) {
        std::string full = section.empty() ? key : section + "." + key;
        auto it = values.find(full);
        if (it == values.end()) return nullptr;
        seen.insert(full);
        return &it->second;
    }
    void finish() const {
        for (const auto& [k, v] : values)
            if (!seen.count(k)) fail("config: unknown key '" + k + "'");
    }
};

// Strips a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (c == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

Table tokenize(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        auto ctx = [&] { return "config line " + std::to_string(lineno); };
        if (line.front() == '[') {
            if (line.back() != ']') fail(ctx() + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(ctx() + ": empty section name");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) fail(ctx() + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(ctx() + ": empty key");
        if (value.empty()) fail(ctx() + ": empty value for '" + key + "'");
        std::string full = section.empty() ? key : section + "." + key;
        if (!t.values.emplace(full, value).second)
            fail(ctx() + ": duplicate key '" + full + "'");
    }
    return t;
}

std::string unquote(const std::string& raw, const std::string& ctx) {
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
        fail(ctx + ": expected a quoted string, got " + raw);
    std::string out;
    for (size_t i = 1; i + 1 < raw.size(); ++i) {
        if (raw[i] == '\\') {
            ++i;
            if (i + 1 >= raw.size()) fail(ctx + ": dangling escape");
            if (raw[i] == '"') out += '"';
            else if (raw[i] == '\\') out += '\\';
            else fail(ctx + ": unsupported escape \\" + std::string(1, raw[i]));
        } else if (raw[i] == '"') {
            fail(ctx + ": stray quote inside string");
        } else {
            out += raw[i];
        }
    }
    return out;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_list(const std::string& raw, const std::string& ctx) {
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
        fail(ctx + ": expected a [..] list, got " + raw);
    std::vector<std::string> items;
    std::string body = raw.substr(1, raw.size() - 2);
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (c == '"' && (i == 0 || body[i - 1] != '\\')) quoted = !quoted;
        if (c == ',' && !quoted) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty()) items.push_back(cur);
    for (const auto& it : items)
        if (it.empty()) fail(ctx + ": empty list element");
    return items;
}

// Typed readers: each overwrites `out` only when the key is present.
struct Reader {
    Table& t;
    std::string section;

    std::string ctx(const std::string& key) const {
        return "config " + (section.empty() ? key : section + "." + key);
    }
    void str(const std::string& key, std::string& out) {
        if (const auto* raw = t.find(section, key)) out = unquote(*raw, ctx(key));
    }
    void boolean(const std::string& key, bool& out) {
        if (const auto* raw = t.find(section, key)) {
            if (*raw == "true") out = true;
            else if (*raw == "false") out = false;
            else fail(ctx(key) + ": expected true/false, got " + *raw);
        }
    }
    template <typename I>
    void integer(const std::string& key, I& out) {
        if (const auto* raw = t.find(section, key)) {
            try {
                size_t pos = 0;
                long long v = std::stoll(*raw, &pos);
                if (pos != raw->size()) throw std::invalid_argument(*raw);
                out = static_cast<I>(v);
                if (static_cast<long long>(out) != v)
                    fail(ctx(key) + ": integer out of range");
            } catch (const QuantError&) {
                throw;
            } catch (const std::exception&) {
                fail(ctx(key) + ": expected an integer, got " + *raw);
            }
        }
    }
    void real(const std::string& key, double& out) {
        if (const auto* raw = t.find(section, key)) {
            char* end = nullptr;
            double v = std::strtod(raw->c_str(), &end);
            if (end != raw->c_str() + raw->size())
                fail(ctx(key) + ": expected a number, got " + *raw);
            out = v;
        }
    }
    void date(const std::string& key, Date& out) {
        if (const auto* raw = t.find(section, key)) {
            if (!looks_like_date(*raw))
                fail(ctx(key) + ": expected YYYY-MM-DD, got " + *raw);
            out = parse_date(*raw);
        }
    }
    void strings(const std::string& key, std::vector<std::string>& out) {
        if (const auto* raw = t.find(section, key)) {
            out.clear();
            for (const auto& item : split_list(*raw, ctx(key)))
                out.push_back(unquote(item, ctx(key)));
        }
    }
    void indices(const std::string& key, std::vector<Index>& out) {
        if (const auto* raw = t.find(section, key)) {
            out.clear();
            for (const auto& item : split_list(*raw, ctx(key))) {
                try {
                    size_t pos = 0;
                    out.push_back(static_cast<Index>(std::stoll(item, &pos)));
                    if (pos != item.size()) throw std::invalid_argument(item);
                } catch (const std::exception&) {
                    fail(ctx(key) + ": expected an integer list element, got " + item);
                }
            }
        }
    }
};

std::string render_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    Table t = tokenize(text);
    RunConfig c;

    Reader top{t, ""};
    top.integer("seed", c.seed);
    top.str("variant", c.variant);
    top.str("out", c.out);

    Reader data{t, "data"};
    data.str("source", c.data.source);
    data.str("csv", c.data.csv);
    data.str("cache_dir", c.data.cache_dir);
    data.str("endpoint", c.data.endpoint);
    data.strings("tickers", c.data.tickers);
    data.date("fetch_start", c.data.fetch_start);
    data.date("fetch_end", c.data.fetch_end);
    data.date("train_end", c.data.train_end);
    data.date("val_end", c.data.val_end);
    data.integer("universe_size", c.data.universe_size);
    data.integer("turnover_window", c.data.turnover_window);
    data.integer("synthetic_seed", c.data.synthetic_seed);
    data.integer("synthetic_days", c.data.synthetic_days);
    data.integer("synthetic_stocks", c.data.synthetic_stocks);
    data.real("synthetic_drift", c.data.synthetic_drift);
    data.real("synthetic_vol", c.data.synthetic_vol);
    if (c.data.source != "synthetic" && c.data.source != "csv" &&
        c.data.source != "fetch")
        fail("config data.source: expected synthetic|csv|fetch, got " +
             c.data.source);

    Reader ind{t, "indicators"};
    ind.integer("l", c.rsrs_l);
    ind.integer("m", c.rsrs_m);

    Reader e{t, "env"};
    e.real("initial_balance", c.env.initial_balance);
    e.integer("hmax", c.env.hmax);
    e.real("cost_percentage", c.env.cost_percentage);
    e.real("rs_buy", c.env.rs_buy);
    e.real("rs_sell", c.env.rs_sell);
    e.boolean("literal_cost_reward", c.env.literal_cost_reward);
    e.boolean("reward_times_100", c.env.reward_times_100);

    Reader tr{t, "train"};
    tr.integer("epochs", c.train.epochs);
    tr.integer("steps_per_epoch", c.train.steps_per_epoch);
    tr.integer("rollouts", c.train.rollouts);
    tr.integer("rollout_k", c.train.rollout_k);
    tr.integer("updates", c.train.updates);
    tr.integer("batch_size", c.train.batch_size);
    tr.integer("warm_start", c.train.warm_start);
    tr.real("keep_fraction", c.train.keep_fraction);
    tr.integer("model_members", c.train.model_members);
    tr.integer("model_elites", c.train.model_elites);
    tr.integer("model_epochs", c.train.model_epochs);
    tr.integer("model_batch", c.train.model_batch);
    tr.real("model_lr", c.train.model_lr);
    tr.real("model_holdout", c.train.model_holdout);
    tr.indices("model_hidden", c.train.model_hidden);
    tr.integer("env_buffer", c.train.env_buffer_capacity);
    tr.integer("model_buffer", c.train.model_buffer_capacity);

    Reader sac{t, "sac"};
    sac.real("gamma", c.train.sac.gamma);
    sac.real("tau", c.train.sac.tau);
    sac.real("alpha", c.train.sac.alpha);
    sac.real("lr", c.train.sac.lr);
    sac.indices("hidden", c.train.sac.hidden);

    Reader cem{t, "cem"};
    cem.integer("horizon", c.train.cem.horizon);
    cem.integer("population", c.train.cem.population);
    cem.integer("elites", c.train.cem.elites);
    cem.integer("iterations", c.train.cem.iterations);
    cem.real("init_std", c.train.cem.init_std);
    cem.real("std_floor", c.train.cem.std_floor);

    Reader bt{t, "backtest"};
    bt.integer("seeds", c.backtest.seeds);
    bt.real("risk_free", c.backtest.risk_free);
    bt.str("baseline", c.backtest.baseline);

    t.finish();
    c.train.variant = agents::variant_from_name(c.variant);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream o;
    auto list_str = [](const std::vector<std::string>& v) {
        std::string s = "[";
        for (size_t i = 0; i < v.size(); ++i)
            s += (i ? ", " : "") + quote(v[i]);
        return s + "]";
    };
    auto list_idx = [](const std::vector<Index>& v) {
        std::string s = "[";
        for (size_t i = 0; i < v.size(); ++i)
            s += (i ? ", " : "") + std::to_string(v[i]);
        return s + "]";
    };
    o << "seed = " << c.seed << "\n";
    o << "variant = " << quote(c.variant) << "\n";
    o << "out = " << quote(c.out) << "\n";
    o << "\n[data]\n";
    o << "source = " << quote(c.data.source) << "\n";
    o << "csv = " << quote(c.data.csv) << "\n";
    o << "cache_dir = " << quote(c.data.cache_dir) << "\n";
    o << "endpoint = " << quote(c.data.endpoint) << "\n";
    o << "tickers = " << list_str(c.data.tickers) << "\n";
    o << "fetch_start = " << format_date(c.data.fetch_start) << "\n";
    o << "fetch_end = " << format_date(c.data.fetch_end) << "\n";
    o << "train_end = " << format_date(c.data.train_end) << "\n";
    o << "val_end = " << format_date(c.data.val_end) << "\n";
    o << "universe_size = " << c.data.universe_size << "\n";
    o << "turnover_window = " << c.data.turnover_window << "\n";
    o << "synthetic_seed = " << c.data.synthetic_seed << "\n";
    o << "synthetic_days = " << c.data.synthetic_days << "\n";
    o << "synthetic_stocks = " << c.data.synthetic_stocks << "\n";
    o << "synthetic_drift = " << render_double(c.data.synthetic_drift) << "\n";
    o << "synthetic_vol = " << render_double(c.data.synthetic_vol) << "\n";
    o << "\n[indicators]\n";
    o << "l = " << c.rsrs_l << "\n";
    o << "m = " << c.rsrs_m << "\n";
    o << "\n[env]\n";
    o << "initial_balance = " << render_double(c.env.initial_balance) << "\n";
    o << "hmax = " << c.env.hmax << "\n";
    o << "cost_percentage = " << render_double(c.env.cost_percentage) << "\n";
    o << "rs_buy = " << render_double(c.env.rs_buy) << "\n";
    o << "rs_sell = " << render_double(c.env.rs_sell) << "\n";
    o << "literal_cost_reward = " << (c.env.literal_cost_reward ? "true" : "false")
      << "\n";
    o << "reward_times_100 = " << (c.env.reward_times_100 ? "true" : "false")
      << "\n";
    o << "\n[train]\n";
    o << "epochs = " << c.train.epochs << "\n";
    o << "steps_per_epoch = " << c.train.steps_per_epoch << "\n";
    o << "rollouts = " << c.train.rollouts << "\n";
    o << "rollout_k = " << c.train.rollout_k << "\n";
    o << "updates = " << c.train.updates << "\n";
    o << "batch_size = " << c.train.batch_size << "\n";
    o << "warm_start = " << c.train.warm_start << "\n";
    o << "keep_fraction = " << render_double(c.train.keep_fraction) << "\n";
    o << "model_members = " << c.train.model_members << "\n";
    o << "model_elites = " << c.train.model_elites << "\n";
    o << "model_epochs = " << c.train.model_epochs << "\n";
    o << "model_batch = " << c.train.model_batch << "\n";
    o << "model_lr = " << render_double(c.train.model_lr) << "\n";
    o << "model_holdout = " << render_double(c.train.model_holdout) << "\n";
    o << "model_hidden = " << list_idx(c.train.model_hidden) << "\n";
    o << "env_buffer = " << c.train.env_buffer_capacity << "\n";
    o << "model_buffer = " << c.train.model_buffer_capacity << "\n";
    o << "\n[sac]\n";
    o << "gamma = " << render_double(c.train.sac.gamma) << "\n";
    o << "tau = " << render_double(c.train.sac.tau) << "\n";
    o << "alpha = " << render_double(c.train.sac.alpha) << "\n";
    o << "lr = " << render_double(c.train.sac.lr) << "\n";
    o << "hidden = " << list_idx(c.train.sac.hidden) << "\n";
    o << "\n[cem]\n";
    o << "horizon = " << c.train.cem.horizon << "\n";
    o << "population = " << c.train.cem.population << "\n";
    o << "elites = " << c.train.cem.elites << "\n";
    o << "iterations = " << c.train.cem.iterations << "\n";
    o << "init_std = " << render_double(c.train.cem.init_std) << "\n";
    o << "std_floor = " << render_double(c.train.cem.std_floor) << "\n";
    o << "\n[backtest]\n";
    o << "seeds = " << c.backtest.seeds << "\n";
    o << "risk_free = " << render_double(c.backtest.risk_free) << "\n";
    o << "baseline = " << quote(c.backtest.baseline) << "\n";
    return o.str();
}

}  // namespace quant::config
