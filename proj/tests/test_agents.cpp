#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "quant/agents.hpp"
#include "quant/nn.hpp"

using namespace quant;
using Catch::Matchers::Contains;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("quant_ag_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

agents::SacConfig tiny_sac() {
    agents::SacConfig c;
    c.hidden = {16, 16};
    return c;
}

dyn::Transition toy_transition(double reward, bool done, std::uint64_t seed) {
    Rng rng(seed);
    dyn::Transition t;
    t.obs = Vec(2);
    t.next_obs = Vec(2);
    t.action = Vec(1);
    for (Index i = 0; i < 2; ++i) t.obs[i] = rng.uniform(-1.0, 1.0);
    t.action[0] = rng.uniform(-1.0, 1.0);
    for (Index i = 0; i < 2; ++i) t.next_obs[i] = rng.uniform(-1.0, 1.0);
    t.reward = reward;
    t.done = done;
    return t;
}

std::vector<const dyn::Transition*> ptrs(const std::vector<dyn::Transition>& v) {
    std::vector<const dyn::Transition*> out;
    for (const auto& t : v) out.push_back(&t);
    return out;
}

bool same_net(const nn::Mlp<double>& a, const nn::Mlp<double>& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (size_t i = 0; i < a.layers.size(); ++i)
        if (!(a.layers[i].w == b.layers[i].w) || !(a.layers[i].b == b.layers[i].b))
            return false;
    return true;
}

void zero_net(nn::Mlp<double>& net) {
    for (auto& l : net.layers) {
        l.w.setZero();
        l.b.setZero();
    }
}

// Small training configuration that finishes in well under a second.
agents::TrainConfig smoke_cfg(agents::Variant v) {
    agents::TrainConfig c;
    c.variant = v;
    c.epochs = 2;
    c.steps_per_epoch = 5;
    c.rollouts = 4;
    c.rollout_k = 2;
    c.updates = 2;
    c.batch_size = 32;
    c.warm_start = 40;
    c.sac.hidden = {16, 16};
    c.model_hidden = {16};
    c.model_members = 3;
    c.model_elites = 2;
    c.model_epochs = 2;
    c.model_batch = 16;
    return c;
}

bool same_row(const agents::HistoryRow& a, const agents::HistoryRow& b) {
    auto eq = [](double x, double y) {
        return (std::isnan(x) && std::isnan(y)) || x == y;
    };
    return a.epoch == b.epoch && a.step == b.step && eq(a.q_loss, b.q_loss) &&
           eq(a.pi_loss, b.pi_loss) && eq(a.entropy, b.entropy) &&
           eq(a.model_holdout_nll, b.model_holdout_nll) &&
           eq(a.env_reward, b.env_reward) &&
           eq(a.model_err_balance, b.model_err_balance) &&
           eq(a.model_err_holdings, b.model_err_holdings) &&
           a.override_count == b.override_count;
}

}  // namespace

TEST_CASE("make_sac validates arguments and mirrors targets", "[agents]") {
    Rng rng(1);
    agents::SacConfig cfg = tiny_sac();
    auto agent = agents::make_sac(6, 2, cfg, rng);

    CHECK(agent.obs_dim == 6);
    CHECK(agent.act_dim == 2);
    REQUIRE(agent.policy.layers.size() == 3);
    CHECK(agent.policy.layers.front().w.cols() == 6);
    CHECK(agent.policy.layers.back().w.rows() == 4);  // mean + log-std rows
    CHECK(agent.q1.layers.front().w.cols() == 8);
    CHECK(agent.q1.layers.back().w.rows() == 1);
    CHECK(same_net(agent.q1_target, agent.q1));
    CHECK(same_net(agent.q2_target, agent.q2));
    CHECK_FALSE(same_net(agent.q1, agent.q2));  // independent streams

    CHECK_THROWS_AS(agents::make_sac(0, 2, cfg, rng), std::exception);
    CHECK_THROWS_AS(agents::make_sac(6, 0, cfg, rng), std::exception);
    agents::SacConfig bad = cfg;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(agents::make_sac(6, 2, bad, rng), std::exception);
    bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(agents::make_sac(6, 2, bad, rng), std::exception);
}

TEST_CASE("entropy is the mean negative log probability", "[agents]") {
    CHECK(agents::entropy(Vec::Constant(7, -std::log(4.0))) ==
          Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(agents::entropy(Vec::Zero(3)) == 0.0);

    Rng rng(2);
    Vec lp(50);
    for (Index i = 0; i < lp.size(); ++i) lp[i] = rng.uniform(-3.0, 0.0);
    double brute = 0;
    for (Index i = 0; i < lp.size(); ++i) brute -= lp[i];
    brute /= 50.0;
    CHECK(agents::entropy(lp) == Approx(brute).margin(1e-12));

    CHECK_THROWS_AS(agents::entropy(Vec(0)), std::exception);
}

TEST_CASE("q_target respects terminal and myopic limits", "[agents]") {
    Rng rng(3);
    auto agent = agents::make_sac(2, 1, tiny_sac(), rng);

    std::vector<dyn::Transition> batch{toy_transition(0.7, true, 10),
                                       toy_transition(-1.3, true, 11)};
    Rng draw(4);
    Vec y = agents::q_target(ptrs(batch), agent, draw);
    CHECK(y[0] == 0.7);  // done gates the bootstrap exactly
    CHECK(y[1] == -1.3);

    agents::SacConfig myopic = tiny_sac();
    myopic.gamma = 1e-12;
    Rng rng2(5);
    auto agent2 = agents::make_sac(2, 1, myopic, rng2);
    std::vector<dyn::Transition> live{toy_transition(0.25, false, 12)};
    Vec y2 = agents::q_target(ptrs(live), agent2, draw);
    CHECK(y2[0] == Approx(0.25).margin(1e-9));

    std::vector<const dyn::Transition*> empty;
    CHECK_THROWS_AS(agents::q_target(empty, agent, draw), std::exception);
}

TEST_CASE("q_target matches a manual single-transition evaluation", "[agents]") {
    Rng rng(6);
    agents::SacConfig cfg = tiny_sac();
    cfg.hidden = {8};
    auto agent = agents::make_sac(2, 1, cfg, rng);

    std::vector<dyn::Transition> batch{toy_transition(0.4, false, 13)};
    Rng ra(70), rb(70);
    Vec y = agents::q_target(ptrs(batch), agent, ra);

    // Same draw stream, assembled by hand.
    Mat raw = nn::forward(agent.policy, Mat(batch[0].next_obs));
    auto head = nn::gaussian_head(raw, 1);
    Mat z(1, 1);
    z(0, 0) = rb.normal();
    auto sq = nn::squashed_gaussian_sample(head.mean, head.log_std, z);
    Mat x(3, 1);
    x.topRows(2) = batch[0].next_obs;
    x.bottomRows(1) = sq.action;
    double q1 = nn::forward(agent.q1_target, x)(0, 0);
    double q2 = nn::forward(agent.q2_target, x)(0, 0);
    double soft = std::min(q1, q2) - cfg.alpha * sq.log_prob[0];
    double manual = 0.4 + cfg.gamma * soft;
    CHECK(y[0] == Approx(manual).margin(1e-8));

    // Never above either single-target bootstrap.
    double y1 = 0.4 + cfg.gamma * (q1 - cfg.alpha * sq.log_prob[0]);
    double y2 = 0.4 + cfg.gamma * (q2 - cfg.alpha * sq.log_prob[0]);
    CHECK(y[0] <= std::min(y1, y2) + 1e-12);
}

TEST_CASE("sac_update with zero learning rates moves nothing", "[agents]") {
    agents::SacConfig cfg = tiny_sac();
    cfg.tau = 0.0;  // freeze targets so every net must stay put
    Rng rng(7);
    auto agent = agents::make_sac(2, 1, cfg, rng);
    auto p0 = agent.policy;
    auto q10 = agent.q1, q20 = agent.q2;

    std::vector<dyn::Transition> batch{toy_transition(0.5, false, 14),
                                       toy_transition(-0.2, false, 15)};
    Rng draw(8);
    auto report = agents::sac_update(agent, ptrs(batch), 0.0, 0.0, draw);

    CHECK(same_net(agent.policy, p0));
    CHECK(same_net(agent.q1, q10));
    CHECK(same_net(agent.q2, q20));
    CHECK(same_net(agent.q1_target, q10));
    CHECK(same_net(agent.q2_target, q20));
    CHECK(std::isfinite(report.q_loss));
    CHECK(std::isfinite(report.pi_loss));
    CHECK(std::isfinite(report.entropy));

    CHECK_THROWS_AS(
        agents::sac_update(agent, std::vector<const dyn::Transition*>{}, 0.0, 0.0, draw),
        std::exception);
}

TEST_CASE("sac_update target smoothing hits both polyak endpoints", "[agents]") {
    std::vector<dyn::Transition> batch{toy_transition(1.0, false, 16),
                                       toy_transition(-1.0, false, 17)};

    SECTION("tau zero leaves targets untouched") {
        agents::SacConfig cfg = tiny_sac();
        cfg.tau = 0.0;
        Rng rng(9);
        auto agent = agents::make_sac(2, 1, cfg, rng);
        auto t10 = agent.q1_target, t20 = agent.q2_target;
        Rng draw(10);
        agents::sac_update(agent, ptrs(batch), 1e-3, 1e-3, draw);
        CHECK(same_net(agent.q1_target, t10));
        CHECK(same_net(agent.q2_target, t20));
        CHECK_FALSE(same_net(agent.q1, t10));  // online net did move
    }

    SECTION("tau one copies the online nets") {
        agents::SacConfig cfg = tiny_sac();
        cfg.tau = 1.0;
        Rng rng(11);
        auto agent = agents::make_sac(2, 1, cfg, rng);
        Rng draw(12);
        agents::sac_update(agent, ptrs(batch), 1e-3, 1e-3, draw);
        CHECK(same_net(agent.q1_target, agent.q1));
        CHECK(same_net(agent.q2_target, agent.q2));
    }

    SECTION("fractional tau mixes exactly") {
        agents::SacConfig cfg = tiny_sac();
        cfg.tau = 0.25;
        Rng rng(13);
        auto agent = agents::make_sac(2, 1, cfg, rng);
        Rng draw(14);
        agents::sac_update(agent, ptrs(batch), 1e-3, 1e-3, draw);  // split the nets
        auto told = agent.q1_target;
        agents::sac_update(agent, ptrs(batch), 1e-3, 1e-3, draw);
        for (size_t i = 0; i < told.layers.size(); ++i) {
            Mat want = 0.25 * agent.q1.layers[i].w + 0.75 * told.layers[i].w;
            CHECK(agent.q1_target.layers[i].w == want);
        }
    }
}

TEST_CASE("sac_update reports the pre-update critic loss", "[agents]") {
    agents::SacConfig cfg = tiny_sac();
    cfg.hidden = {8};
    Rng rng(15);
    auto agent = agents::make_sac(2, 1, cfg, rng);
    std::vector<dyn::Transition> batch{toy_transition(0.3, false, 18),
                                       toy_transition(-0.6, true, 19),
                                       toy_transition(0.1, false, 20)};
    auto q1s = agent.q1, q2s = agent.q2;
    auto pol = agent.policy;
    auto t1 = agent.q1_target, t2 = agent.q2_target;

    Rng ra(21), rb(21);
    auto report = agents::sac_update(agent, ptrs(batch), 1e-3, 1e-3, ra);

    // Replay the same draws against the snapshots.
    const Index N = 3;
    Mat next(2, N), obs(2, N);
    for (Index n = 0; n < N; ++n) {
        next.col(n) = batch[static_cast<size_t>(n)].next_obs;
        obs.col(n) = batch[static_cast<size_t>(n)].obs;
    }
    Mat rawn = nn::forward(pol, next);
    auto headn = nn::gaussian_head(rawn, 1);
    Mat zn(1, N);
    for (Index n = 0; n < N; ++n) zn(0, n) = rb.normal();
    auto sqn = nn::squashed_gaussian_sample(headn.mean, headn.log_std, zn);
    Mat xn(3, N);
    xn.topRows(2) = next;
    xn.bottomRows(1) = sqn.action;
    Vec q1n = nn::forward(t1, xn).row(0);
    Vec q2n = nn::forward(t2, xn).row(0);
    Vec y(N);
    for (Index n = 0; n < N; ++n) {
        const auto& t = batch[static_cast<size_t>(n)];
        double soft = std::min(q1n[n], q2n[n]) - cfg.alpha * sqn.log_prob[n];
        y[n] = t.reward + cfg.gamma * (t.done ? 0.0 : 1.0) * soft;
    }
    Mat x(3, N);
    x.topRows(2) = obs;
    for (Index n = 0; n < N; ++n)
        x.col(n).tail(1) = batch[static_cast<size_t>(n)].action;
    Vec p1 = nn::forward(q1s, x).row(0);
    Vec p2 = nn::forward(q2s, x).row(0);
    double mse1 = (p1 - y).squaredNorm() / 3.0;
    double mse2 = (p2 - y).squaredNorm() / 3.0;
    CHECK(report.q_loss == Approx(0.5 * (mse1 + mse2)).epsilon(1e-12));

    // Entropy comes from the policy sample drawn right after the critic step.
    Mat zp(1, N);
    for (Index n = 0; n < N; ++n) zp(0, n) = rb.normal();
    Mat rawo = nn::forward(pol, obs);
    auto heado = nn::gaussian_head(rawo, 1);
    auto sqo = nn::squashed_gaussian_sample(heado.mean, heado.log_std, zp);
    CHECK(report.entropy == Approx(agents::entropy(sqo.log_prob)).epsilon(1e-12));
}

TEST_CASE("policy gradient matches finite differences on a 4-parameter toy",
          "[agents]") {
    agents::SacConfig cfg;
    cfg.hidden = {};  // policy is a single linear layer: 2x1 weights + 2 biases
    Rng rng(22);
    auto agent = agents::make_sac(1, 1, cfg, rng);
    REQUIRE(agent.policy.layers.size() == 1);

    std::vector<dyn::Transition> batch;
    Rng brng(23);
    for (int i = 0; i < 4; ++i) {
        dyn::Transition t;
        t.obs = Vec::Constant(1, brng.uniform(-1.0, 1.0));
        t.action = Vec::Constant(1, brng.uniform(-1.0, 1.0));
        t.next_obs = Vec::Constant(1, brng.uniform(-1.0, 1.0));
        t.reward = brng.uniform(-1.0, 1.0);
        t.done = false;
        batch.push_back(t);
    }
    const Index N = 4;
    Mat obs(1, N);
    for (Index n = 0; n < N; ++n) obs(0, n) = batch[static_cast<size_t>(n)].obs[0];

    // Zero learning rates keep every net fixed while Adam's first moment
    // captures the raw gradient (m = 0.1 g on the first step).
    Rng ra(24), rb(24);
    agents::sac_update(agent, ptrs(batch), 0.0, 0.0, ra);
    Mat gw = agent.opt_policy.m[0].w / 0.1;
    Vec gb = agent.opt_policy.m[0].b / 0.1;

    // Recover the frozen policy noise: one normal per sample for the target
    // action, then one per sample for the reparameterized action.
    for (Index n = 0; n < N; ++n) rb.normal();
    Mat zp(1, N);
    for (Index n = 0; n < N; ++n) zp(0, n) = rb.normal();

    auto objective = [&](const nn::Mlp<double>& pol) {
        Mat raw = nn::forward(pol, obs);
        auto head = nn::gaussian_head(raw, 1);
        auto sq = nn::squashed_gaussian_sample(head.mean, head.log_std, zp);
        Mat x(2, N);
        x.topRows(1) = obs;
        x.bottomRows(1) = sq.action;
        Vec q1 = nn::forward(agent.q1, x).row(0);
        Vec q2 = nn::forward(agent.q2, x).row(0);
        return (cfg.alpha * sq.log_prob.array() - q1.cwiseMin(q2).array()).mean();
    };

    const double h = 1e-6;
    double worst = 0;
    auto check_param = [&](double* p, double analytic) {
        double keep = *p;
        *p = keep + h;
        double up = objective(agent.policy);
        *p = keep - h;
        double dn = objective(agent.policy);
        *p = keep;
        double fd = (up - dn) / (2 * h);
        double rel = std::abs(fd - analytic) /
                     std::max({1.0, std::abs(fd), std::abs(analytic)});
        worst = std::max(worst, rel);
    };
    for (Index r = 0; r < 2; ++r) check_param(&agent.policy.layers[0].w(r, 0), gw(r, 0));
    for (Index r = 0; r < 2; ++r) check_param(&agent.policy.layers[0].b[r], gb[r]);
    CHECK(worst < 1e-3);
}

TEST_CASE("repeated updates on a fixed bandit batch drive the critic loss down",
          "[agents]") {
    agents::SacConfig cfg = tiny_sac();
    Rng rng(25);
    auto agent = agents::make_sac(2, 1, cfg, rng);

    std::vector<dyn::Transition> batch(2);
    batch[0].obs = Vec::Unit(2, 0);
    batch[0].action = Vec::Constant(1, 0.5);
    batch[0].next_obs = batch[0].obs;
    batch[0].reward = 1.0;
    batch[0].done = true;  // y == r, a pure regression target
    batch[1].obs = Vec::Unit(2, 1);
    batch[1].action = Vec::Constant(1, -0.5);
    batch[1].next_obs = batch[1].obs;
    batch[1].reward = -1.0;
    batch[1].done = true;

    Rng draw(26);
    double first = 0, last = 0;
    for (int i = 0; i < 2000; ++i) {
        auto r = agents::sac_update(agent, ptrs(batch), 3e-3, 3e-4, draw);
        if (i == 0) first = r.q_loss;
        last = r.q_loss;
    }
    CHECK(last < 1e-3);
    CHECK(last < first);
}

TEST_CASE("select_action stays inside the open unit box and replays", "[agents]") {
    Rng rng(27);
    auto agent = agents::make_sac(3, 2, tiny_sac(), rng);

    SECTION("deterministic mode is tanh of the mean") {
        zero_net(agent.policy);
        Rng draw(28);
        Vec a = agents::select_action(agent, Vec::Constant(3, 0.4), true, draw);
        CHECK(a == Vec::Zero(2));
    }

    SECTION("bounds over many random states") {
        Rng draw(29);
        for (int i = 0; i < 10000; ++i) {
            Vec obs(3);
            for (Index j = 0; j < 3; ++j) obs[j] = draw.uniform(-2.0, 2.0);
            Vec a = agents::select_action(agent, obs, false, draw);
            REQUIRE(a.cwiseAbs().maxCoeff() < 1.0);
        }
    }

    SECTION("same seed reproduces the sample sequence") {
        Rng r1(30), r2(30);
        for (int i = 0; i < 10; ++i) {
            Vec obs = Vec::Constant(3, 0.1 * i);
            Vec a1 = agents::select_action(agent, obs, false, r1);
            Vec a2 = agents::select_action(agent, obs, false, r2);
            REQUIRE(a1 == a2);
        }
    }
}

TEST_CASE("cem_plan refines toward a quadratic optimum", "[agents]") {
    agents::CemPlanner planner;
    planner.horizon = 1;
    planner.population = 64;
    planner.elites = 8;
    planner.iterations = 5;

    auto quad = [](const Vec& obs, const Vec& a) {
        double r = -(a[0] - 0.3) * (a[0] - 0.3);
        return std::make_pair(obs, r);
    };

    Rng rng(31);
    Vec a = agents::cem_plan(planner, quad, Vec::Zero(1), 1, rng);
    CHECK(std::abs(a[0] - 0.3) < 0.05);

    SECTION("multi-step horizon still nails the per-step optimum") {
        planner.horizon = 3;
        Rng r2(32);
        Vec b = agents::cem_plan(planner, quad, Vec::Zero(1), 1, r2);
        CHECK(std::abs(b[0] - 0.3) < 0.05);
    }

    SECTION("zero iterations return the zero initial mean") {
        planner.iterations = 0;
        Rng r2(33);
        Vec b = agents::cem_plan(planner, quad, Vec::Zero(1), 1, r2);
        CHECK(b == Vec::Zero(1));
    }

    SECTION("elite count equal to the population removes selection pressure") {
        planner.horizon = 1;
        planner.population = 8;
        planner.elites = 8;
        planner.iterations = 1;
        Rng r2(34), r3(34);
        Vec b = agents::cem_plan(planner, quad, Vec::Zero(2), 2, r2);
        Mat pop(2, 8);
        for (int p = 0; p < 8; ++p)
            for (Index i = 0; i < 2; ++i)
                pop(i, p) = std::clamp(planner.init_std * r3.normal(), -1.0, 1.0);
        Vec want = pop.rowwise().mean();
        CHECK((b - want).cwiseAbs().maxCoeff() < 1e-12);
    }

    SECTION("validation") {
        agents::CemPlanner bad = planner;
        bad.elites = 0;
        Rng r2(35);
        CHECK_THROWS_AS(agents::cem_plan(bad, quad, Vec::Zero(1), 1, r2),
                        std::exception);
        bad.elites = planner.population + 1;
        CHECK_THROWS_AS(agents::cem_plan(bad, quad, Vec::Zero(1), 1, r2),
                        std::exception);
        bad = planner;
        bad.horizon = 0;
        CHECK_THROWS_AS(agents::cem_plan(bad, quad, Vec::Zero(1), 1, r2),
                        std::exception);
    }

    SECTION("an untrained model is rejected through the dynamics adapter") {
        Rng r2(36);
        auto model = dyn::make_ensemble(1, 1, {8}, 3, 2, r2);
        Rng r3(37);
        CHECK_THROWS_AS(agents::cem_plan(planner, agents::model_dynamics(model),
                                         Vec::Zero(1), 1, r3),
                        std::exception);
    }
}

TEST_CASE("variant names and capability flags", "[agents]") {
    using agents::Variant;
    CHECK(agents::variant_from_name("PETS") == Variant::PETS);
    CHECK(agents::variant_from_name("mbpo") == Variant::MBPO);
    CHECK(agents::variant_from_name("M2ac") == Variant::M2AC);
    CHECK(agents::variant_from_name("rspo") == Variant::RSPO);
    CHECK(agents::variant_from_name("RSAC") == Variant::RSAC);
    CHECK_THROWS_WITH(agents::variant_from_name("ppo"), Contains("unknown variant"));

    for (auto v : {Variant::PETS, Variant::MBPO, Variant::M2AC, Variant::RSPO,
                   Variant::RSAC})
        CHECK(agents::variant_from_name(agents::variant_name(v)) == v);

    CHECK_FALSE(agents::variant_overrides(Variant::PETS));
    CHECK_FALSE(agents::variant_overrides(Variant::MBPO));
    CHECK_FALSE(agents::variant_overrides(Variant::M2AC));
    CHECK(agents::variant_overrides(Variant::RSPO));
    CHECK(agents::variant_overrides(Variant::RSAC));

    CHECK_FALSE(agents::variant_masks(Variant::PETS));
    CHECK_FALSE(agents::variant_masks(Variant::MBPO));
    CHECK(agents::variant_masks(Variant::M2AC));
    CHECK_FALSE(agents::variant_masks(Variant::RSPO));
    CHECK(agents::variant_masks(Variant::RSAC));
}

TEST_CASE("train performs exact loop accounting at minimal settings", "[agents]") {
    auto slice = fixtures::tiny_slice(9, 1, 100);
    env::EnvConfig ecfg;

    agents::TrainConfig cfg = smoke_cfg(agents::Variant::MBPO);
    cfg.epochs = 1;
    cfg.steps_per_epoch = 1;
    cfg.rollouts = 0;
    cfg.updates = 3;  // skipped: the model buffer never fills
    cfg.warm_start = 25;

    auto tr = agents::train(cfg, slice, ecfg, 100);
    REQUIRE(tr.history.size() == 1);
    const auto& row = tr.history[0];
    CHECK(row.epoch == 1);
    CHECK(row.step == 26);  // warm start plus the single epoch step
    CHECK(tr.sac_update_calls == 0);
    CHECK(tr.cem_plan_calls == 0);
    CHECK(std::isnan(row.q_loss));
    CHECK(std::isnan(row.pi_loss));
    CHECK(std::isnan(row.entropy));
    CHECK(std::isfinite(row.model_holdout_nll));
    CHECK(std::isfinite(row.env_reward));
    CHECK(row.override_count == 0);

    SECTION("rollouts without updates leave losses undefined") {
        cfg.rollouts = 2;
        cfg.updates = 0;
        auto tr2 = agents::train(cfg, slice, ecfg, 101);
        CHECK(tr2.sac_update_calls == 0);
        CHECK(std::isnan(tr2.history[0].q_loss));
    }

    SECTION("counts below one are rejected") {
        cfg.epochs = 0;
        CHECK_THROWS_AS(agents::train(cfg, slice, ecfg, 102), std::exception);
        cfg.epochs = 1;
        cfg.steps_per_epoch = 0;
        CHECK_THROWS_AS(agents::train(cfg, slice, ecfg, 103), std::exception);
    }
}

TEST_CASE("train is deterministic per seed and counts updates", "[agents]") {
    auto slice = fixtures::tiny_slice(3, 2, 130);
    env::EnvConfig ecfg;
    agents::TrainConfig cfg = smoke_cfg(agents::Variant::MBPO);

    auto a = agents::train(cfg, slice, ecfg, 42);
    auto b = agents::train(cfg, slice, ecfg, 42);
    auto c = agents::train(cfg, slice, ecfg, 43);

    REQUIRE(a.history.size() == 2);
    CHECK(a.history[0].step == 45);
    CHECK(a.history[1].step == 50);
    CHECK(a.sac_update_calls == 2 * 5 * 2);
    CHECK(a.history[0].override_count == 0);  // MBPO never overrides
    CHECK(std::isfinite(a.history[0].q_loss));
    CHECK(std::isfinite(a.history[1].env_reward));

    for (size_t i = 0; i < a.history.size(); ++i)
        CHECK(same_row(a.history[i], b.history[i]));
    CHECK(same_net(a.agent.policy, b.agent.policy));
    CHECK(same_net(a.agent.q1, b.agent.q1));

    bool differs = false;
    for (size_t i = 0; i < a.history.size(); ++i)
        if (!same_row(a.history[i], c.history[i])) differs = true;
    CHECK(differs);
}

TEST_CASE("pets plans with cem and never touches sac", "[agents]") {
    auto slice = fixtures::tiny_slice(4, 1, 110);
    env::EnvConfig ecfg;
    agents::TrainConfig cfg = smoke_cfg(agents::Variant::PETS);
    cfg.epochs = 2;
    cfg.steps_per_epoch = 4;
    cfg.warm_start = 30;
    cfg.cem.horizon = 2;
    cfg.cem.population = 16;
    cfg.cem.elites = 4;
    cfg.cem.iterations = 2;

    auto tr = agents::train(cfg, slice, ecfg, 7);
    CHECK(tr.sac_update_calls == 0);
    CHECK(tr.cem_plan_calls == 2 * 4);
    for (const auto& row : tr.history) {
        CHECK(std::isnan(row.q_loss));
        CHECK(std::isfinite(row.model_holdout_nll));
    }

    // Planner noise comes from a fixed internal stream in deterministic mode.
    auto c1 = agents::evaluate(tr, slice, ecfg, "pets");
    auto c2 = agents::evaluate(tr, slice, ecfg, "pets");
    CHECK(c1.asset == c2.asset);
    CHECK(c1.actions == c2.actions);
}

TEST_CASE("rspo override fires in training where mbpo stays silent", "[agents]") {
    auto slice = fixtures::crash_slice(5);
    env::EnvConfig ecfg = fixtures::crash_env_config();
    agents::TrainConfig cfg = smoke_cfg(agents::Variant::RSPO);
    cfg.epochs = 2;
    cfg.steps_per_epoch = 20;
    cfg.warm_start = 30;

    auto rspo = agents::train(cfg, slice, ecfg, 11);
    long fired = 0;
    for (const auto& row : rspo.history) fired += row.override_count;
    CHECK(fired > 0);

    cfg.variant = agents::Variant::MBPO;
    auto mbpo = agents::train(cfg, slice, ecfg, 11);
    long silent = 0;
    for (const auto& row : mbpo.history) silent += row.override_count;
    CHECK(silent == 0);
}

TEST_CASE("evaluate liquidates holdings while the sell signal is active",
          "[agents]") {
    auto slice = fixtures::crash_slice(5);
    env::EnvConfig ecfg = fixtures::crash_env_config();
    env::TradingEnv probe(slice, ecfg);
    const Index obs_dim = probe.observation().size();

    agents::SacConfig scfg;
    scfg.hidden = {8};
    Rng rng(38);
    agents::TrainResult tr;
    tr.cfg.variant = agents::Variant::RSPO;
    tr.agent = agents::make_sac(obs_dim, 1, scfg, rng);
    // Constant-buy policy: zero trunk, mean bias 0.5 -> +46 shares a day.
    zero_net(tr.agent.policy);
    tr.agent.policy.layers.back().b[0] = 0.5;
    tr.agent.policy.layers.back().b[1] = -2.0;

    auto curve = agents::evaluate(tr, slice, ecfg, "rspo");
    CHECK(curve.asset[0] == ecfg.initial_balance);
    CHECK(curve.rewards[0] == 0.0);
    CHECK(curve.costs[0] == 0.0);

    double held = 0;
    int liquidations = 0;
    for (Index t = 0; t < curve.actions.rows(); ++t) {
        double rd = slice.rightdev_raw(t, 0);
        double executed = curve.actions(t, 0);
        if (!std::isnan(rd) && rd < ecfg.rs_sell) {
            REQUIRE(executed == -std::min(static_cast<double>(ecfg.hmax), held));
            if (held > 0) ++liquidations;
        }
        held += executed;
    }
    CHECK(liquidations > 0);
}

TEST_CASE("evaluate holds flat at the initial balance for a zero policy",
          "[agents]") {
    auto slice = fixtures::tiny_slice(31, 1, 100, 0.0, 0.0);
    env::EnvConfig ecfg;
    env::TradingEnv probe(slice, ecfg);

    Rng rng(39);
    agents::TrainResult tr;
    tr.cfg.variant = agents::Variant::MBPO;
    tr.agent = agents::make_sac(probe.observation().size(), 1, tiny_sac(), rng);
    zero_net(tr.agent.policy);

    auto curve = agents::evaluate(tr, slice, ecfg, "hold");
    CHECK(curve.asset == Vec::Constant(slice.days(), ecfg.initial_balance));
    CHECK(curve.rewards == Vec::Zero(slice.days()));
    CHECK(curve.costs == Vec::Zero(slice.days()));
    CHECK(curve.actions == Mat::Zero(slice.days() - 1, 1));
}

TEST_CASE("evaluate matches an action replay through a fresh environment",
          "[agents]") {
    auto slice = fixtures::tiny_slice(17, 2, 140);
    env::EnvConfig ecfg;
    env::TradingEnv probe(slice, ecfg);

    Rng rng(40);
    agents::TrainResult tr;
    tr.cfg.variant = agents::Variant::MBPO;
    tr.agent = agents::make_sac(probe.observation().size(), 2, tiny_sac(), rng);

    auto curve = agents::evaluate(tr, slice, ecfg, "replay");
    REQUIRE(curve.asset.size() == slice.days());
    REQUIRE(curve.actions.rows() == slice.days() - 1);

    env::TradingEnv env(slice, ecfg);
    CHECK(curve.asset[0] == Approx(env::asset_value(env.state())).epsilon(1e-12));
    for (Index t = 0; t < curve.actions.rows(); ++t) {
        env::Action a{curve.actions.row(t).cast<int>()};
        auto res = env.step(a);
        REQUIRE(curve.asset[t + 1] ==
                Approx(env::asset_value(res.next_state)).epsilon(1e-6));
        CHECK(res.executed.cast<double>() == curve.actions.row(t).transpose());
        CHECK(curve.rewards[t + 1] == res.reward);
        CHECK(curve.costs[t + 1] == res.cost);
    }
    CHECK(env.done());

    SECTION("deterministic and seeded stochastic passes replay exactly") {
        auto again = agents::evaluate(tr, slice, ecfg, "replay");
        CHECK(again.asset == curve.asset);
        Rng s1(99), s2(99);
        auto st1 = agents::evaluate(tr, slice, ecfg, "s", &s1);
        auto st2 = agents::evaluate(tr, slice, ecfg, "s", &s2);
        CHECK(st1.asset == st2.asset);
        CHECK(st1.actions == st2.actions);
    }
}

TEST_CASE("history csv round-trips including nan cells", "[agents]") {
    TempDir tmp;
    std::vector<agents::HistoryRow> rows(2);
    rows[0].epoch = 1;
    rows[0].step = 26;
    rows[0].q_loss = rows[0].pi_loss = rows[0].entropy =
        std::numeric_limits<double>::quiet_NaN();
    rows[0].model_holdout_nll = -1.25;
    rows[0].env_reward = 0.5;
    rows[0].model_err_balance = 0.001953125;
    rows[0].model_err_holdings = 0.375;
    rows[0].override_count = 3;
    rows[1].epoch = 2;
    rows[1].step = 31;
    rows[1].q_loss = 1.5;
    rows[1].pi_loss = -0.25;
    rows[1].entropy = 0.75;
    rows[1].model_holdout_nll = -2.5;
    rows[1].env_reward = -0.125;

    auto path = (tmp.path / "history.csv").string();
    agents::write_history_csv(path, rows);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "epoch,step,q_loss,pi_loss,entropy,model_holdout_nll,env_reward,"
          "model_err_balance,model_err_holdings,override_count");

    auto back = agents::read_history_csv(path);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) REQUIRE(same_row(back[i], rows[i]));

    CHECK_THROWS_AS(agents::read_history_csv((tmp.path / "nope.csv").string()),
                    std::exception);
    auto bad = (tmp.path / "bad.csv").string();
    std::ofstream(bad) << "epoch,step\n1,2\n";
    CHECK_THROWS_AS(agents::read_history_csv(bad), std::exception);
}

TEST_CASE("agent checkpoints round-trip through json", "[agents]") {
    auto slice = fixtures::tiny_slice(5, 1, 120);
    env::EnvConfig ecfg;
    agents::TrainConfig cfg = smoke_cfg(agents::Variant::RSPO);
    cfg.epochs = 1;
    cfg.steps_per_epoch = 3;
    cfg.warm_start = 30;
    cfg.cem.horizon = 2;

    auto tr = agents::train(cfg, slice, ecfg, 55);
    auto back = agents::agent_from_json(agents::agent_to_json(tr));

    CHECK(back.cfg.variant == agents::Variant::RSPO);
    CHECK(back.agent.obs_dim == tr.agent.obs_dim);
    CHECK(back.agent.act_dim == tr.agent.act_dim);
    CHECK(same_net(back.agent.policy, tr.agent.policy));
    CHECK(same_net(back.agent.q1, tr.agent.q1));
    CHECK(same_net(back.agent.q2, tr.agent.q2));
    CHECK(same_net(back.agent.q1_target, tr.agent.q1_target));
    CHECK(same_net(back.agent.q2_target, tr.agent.q2_target));
    CHECK(back.model.trained == tr.model.trained);
    CHECK(back.model.elites == tr.model.elites);
    CHECK(back.cfg.cem.horizon == 2);
    CHECK(back.cfg.cem.population == cfg.cem.population);
    CHECK(back.cfg.sac.gamma == cfg.sac.gamma);
    CHECK(back.cfg.sac.tau == cfg.sac.tau);
    CHECK(back.cfg.sac.alpha == cfg.sac.alpha);
    CHECK(back.agent.cfg.gamma == cfg.sac.gamma);

    auto c1 = agents::evaluate(tr, slice, ecfg, "a");
    auto c2 = agents::evaluate(back, slice, ecfg, "a");
    CHECK(c1.asset == c2.asset);
    CHECK(c1.actions == c2.actions);

    CHECK_THROWS_WITH(agents::agent_from_json("{\"format_version\": 2}"),
                      Contains("unsupported format"));
}

TEST_CASE("rspo overrides reshape experience but not the schedule",
          "[agents][trend]") {
    auto slice = fixtures::tiny_slice(21, 1, 170, 0.006, 0.01);
    env::EnvConfig ecfg;

    agents::TrainConfig cfg = smoke_cfg(agents::Variant::MBPO);
    cfg.epochs = 5;
    cfg.steps_per_epoch = 10;
    cfg.warm_start = 50;

    long fired = 0;
    int diverged = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cfg.variant = agents::Variant::MBPO;
        auto mbpo = agents::train(cfg, slice, ecfg, seed);
        cfg.variant = agents::Variant::RSPO;
        auto rspo = agents::train(cfg, slice, ecfg, seed);
        for (const auto& row : rspo.history) fired += row.override_count;

        // Same loop accounting either way: the override only rewrites actions.
        REQUIRE(rspo.history.size() == mbpo.history.size());
        CHECK(rspo.sac_update_calls == mbpo.sac_update_calls);
        CHECK(rspo.cem_plan_calls == mbpo.cem_plan_calls);
        for (size_t e = 0; e < rspo.history.size(); ++e) {
            CHECK(rspo.history[e].epoch == mbpo.history[e].epoch);
            CHECK(rspo.history[e].step == mbpo.history[e].step);
            CHECK(mbpo.history[e].override_count == 0);
        }
        for (size_t e = 0; e < rspo.history.size(); ++e)
            if (rspo.history[e].env_reward != mbpo.history[e].env_reward) {
                ++diverged;
                break;
            }
    }
    CHECK(fired > 0);    // thresholds actually crossed on this market
    CHECK(diverged >= 1);  // rewritten actions show up in the collected rewards
}
