#pragma once
#include <atomic>
#include <map>
#include <string>
#include <thread>

#include "quant/dynamics.hpp"
#include "quant/market_data.hpp"
#include "quant/rng.hpp"
#include "quant/trading_env.hpp"

namespace fixtures {

using namespace quant;

// Synthetic boom / crash / recovery market: 100 up days (+0.3%/day), a 30-day
// crash to 60% of peak, 70 recovery days (+0.5%/day), all with light noise.
// During the crash, lows detach from closes (panic spread), so the rolling
// high-on-low regression slope collapses and the right-deviated score goes
// deeply negative -- the regime the threshold override is built to catch.
data::Universe crash_universe(std::uint64_t seed);

// Env settings paired with the crash fixture (small balance so full exposure
// is reachable within an episode).
env::EnvConfig crash_env_config();

// crash_universe -> market slice with l=10, m=60 (warm-up 69 days, trading
// starts just before the crash).
env::MarketSlice crash_slice(std::uint64_t seed);

// Deterministic toy dynamics: obs' = obs + 0.1 * action, reward = -sum|a_i|.
// Observations and actions drawn uniform in [-1, 1]^dim.
dyn::Transition linear_step(const Vec& obs, const Vec& act);
void fill_linear_buffer(dyn::ReplayBuffer& buffer, Index obs_dim, Index act_dim,
                        int n, Rng& rng);

// One-ticker universe whose calendar is every weekday in [start, end]
// (closes grow smoothly; prices are irrelevant to calendar tests).
data::Universe weekday_universe(Date start, Date end);

// Small aligned synthetic slice for env/agent tests (l=10, m=20, warm-up 60).
env::MarketSlice tiny_slice(std::uint64_t seed, Index stocks, Index days,
                            double drift = 5e-4, double vol = 0.02);

// Minimal loopback HTTP server handing out canned CSV payloads keyed by the
// `ticker` query parameter. Counts requests so cache-hit tests can assert
// zero network traffic.
class FixtureServer {
  public:
    explicit FixtureServer(std::map<std::string, std::string> payloads);
    ~FixtureServer();
    std::string endpoint() const;  // http://127.0.0.1:<port>/data
    int hits() const { return hits_.load(); }

  private:
    void serve();
    std::map<std::string, std::string> payloads_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<int> hits_{0};
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

}  // namespace fixtures
