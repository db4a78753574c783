#include "fixtures.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstring>

namespace fixtures {

data::Universe crash_universe(std::uint64_t seed) {
    constexpr int kUp = 100, kCrash = 30, kRecover = 70;
    constexpr int kDays = kUp + kCrash + kRecover;
    constexpr double kVol = 0.004;
    const double mu_up = 0.003, mu_crash = std::log(0.6) / kCrash, mu_rec = 0.005;

    Rng rng(seed);
    Rng path = rng.fork("path"), band = rng.fork("band");

    data::PriceSeries s;
    s.ticker = "CRSH";
    double close = 100.0, prev_close = 100.0, spread = 0.0;
    Date day = make_date(2020, 1, 1);
    for (int t = 0; t < kDays; ++t, day = day + 1) {
        if (t > 0) {
            const double mu = t < kUp ? mu_up : (t < kUp + kCrash ? mu_crash : mu_rec);
            prev_close = close;
            close *= std::exp(mu + kVol * path.normal());
            // Panic spread: decays slowly while returns stay negative, and
            // spikes with the size of the down move -- lows detach from
            // closes through the crash, collapsing the high-on-low slope.
            const double r = std::log(close / prev_close);
            spread = (r < 0 ? 0.985 : 0.6) * spread + 1.0 * std::max(0.0, -r - 0.005);
        }
        const double a = 0.006 * (1.0 + std::fabs(band.normal()));
        const double w = 0.006 * (1.0 + std::fabs(band.normal()));
        data::Bar b;
        b.date = day;
        b.ticker = s.ticker;
        b.close = close;
        b.high = close * (1.0 + a);
        b.low = close * std::exp(-spread) * (1.0 - w);
        b.open = t == 0 ? close : std::clamp(prev_close, b.low, b.high);
        b.volume = 1e6;
        s.bars.push_back(b);
    }
    return data::align({s});
}

env::EnvConfig crash_env_config() {
    env::EnvConfig cfg;
    cfg.initial_balance = 5e4;
    cfg.hmax = 100;
    cfg.cost_percentage = 0.001;
    cfg.rs_buy = 1.0;
    cfg.rs_sell = -0.4;
    return cfg;
}

env::MarketSlice crash_slice(std::uint64_t seed) {
    return env::build_market_slice(crash_universe(seed), 10, 60);
}

dyn::Transition linear_step(const Vec& obs, const Vec& act) {
    dyn::Transition t;
    t.obs = obs;
    t.action = act;
    t.next_obs = obs;
    t.next_obs.head(act.size()) += 0.1 * act;
    t.reward = -act.cwiseAbs().sum();
    t.done = false;
    return t;
}

void fill_linear_buffer(dyn::ReplayBuffer& buffer, Index obs_dim, Index act_dim,
                        int n, Rng& rng) {
    require(act_dim <= obs_dim, "fill_linear_buffer: act_dim <= obs_dim");
    for (int i = 0; i < n; ++i) {
        Vec obs(obs_dim), act(act_dim);
        for (Index j = 0; j < obs_dim; ++j) obs[j] = rng.uniform(-1.0, 1.0);
        for (Index j = 0; j < act_dim; ++j) act[j] = rng.uniform(-1.0, 1.0);
        buffer.push(linear_step(obs, act));
    }
}

data::Universe weekday_universe(Date start, Date end) {
    data::PriceSeries s;
    s.ticker = "IDX";
    int i = 0;
    for (Date d = start; d <= end; d = d + 1) {
        const int wd = weekday(d);
        if (wd == 0 || wd == 6) continue;
        data::Bar b;
        b.date = d;
        b.ticker = s.ticker;
        b.close = 100.0 * std::exp(1e-4 * i++);
        b.open = b.close;
        b.high = b.close * 1.001;
        b.low = b.close * 0.999;
        b.volume = 1e6;
        s.bars.push_back(b);
    }
    return data::align({s});
}

env::MarketSlice tiny_slice(std::uint64_t seed, Index stocks, Index days,
                            double drift, double vol) {
    return env::build_market_slice(
        data::synthetic_universe(seed, stocks, days, drift, vol), 10, 20);
}

FixtureServer::FixtureServer(std::map<std::string, std::string> payloads)
    : payloads_(std::move(payloads)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    require(listen_fd_ >= 0, "FixtureServer: socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    require(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0,
            "FixtureServer: bind failed");
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    require(::listen(listen_fd_, 8) == 0, "FixtureServer: listen failed");
    thread_ = std::thread([this] { serve(); });
}

FixtureServer::~FixtureServer() {
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

std::string FixtureServer::endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/data";
}

void FixtureServer::serve() {
    while (!stop_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        if (::poll(&pfd, 1, 50) <= 0) continue;
        int conn = ::accept(listen_fd_, nullptr, nullptr);
        if (conn < 0) continue;
        std::string req;
        char buf[2048];
        while (req.find("\r\n\r\n") == std::string::npos) {
            ssize_t n = ::read(conn, buf, sizeof buf);
            if (n <= 0) break;
            req.append(buf, static_cast<size_t>(n));
        }
        ++hits_;
        std::string ticker;
        if (auto p = req.find("ticker="); p != std::string::npos) {
            p += 7;
            while (p < req.size() && req[p] != '&' && req[p] != ' ')
                ticker += req[p++];
        }
        std::string response;
        auto it = payloads_.find(ticker);
        if (it != payloads_.end()) {
            response = "HTTP/1.1 200 OK\r\nContent-Type: text/csv\r\n"
                       "Content-Length: " + std::to_string(it->second.size()) +
                       "\r\nConnection: close\r\n\r\n" + it->second;
        } else {
            response = "HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n"
                       "Connection: close\r\n\r\n";
        }
        size_t sent = 0;
        while (sent < response.size()) {
            ssize_t n = ::write(conn, response.data() + sent, response.size() - sent);
            if (n <= 0) break;
            sent += static_cast<size_t>(n);
        }
        ::close(conn);
    }
}

}  // namespace fixtures
