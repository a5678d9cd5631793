#include <gtest/gtest.h>

#include <mmwbeam/agent.hpp>
#include <mmwbeam/baselines.hpp>

#include <chrono>
#include <sstream>

using namespace mmwbeam;

namespace {

NetworkRealization three_links() {
    NetworkRealization r;
    r.tx = {{0, 0}, {5, 0}, {0, 5}};
    r.rx = {{1, 0}, {6, 0}, {0, 6}};
    // gain[i][j]: tx i to rx j
    r.gain = {{1e-6, 1e-8, 1e-9}, {1e-7, 1e-5, 1e-10}, {1e-11, 1e-12, 1e-7}};
    r.los.assign(3, std::vector<bool>(3, true));
    r.side_len = 20;
    return r;
}

void expect_vec_near(const std::vector<double>& got, const std::vector<double>& want, double tol) {
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], tol) << "entry " << k;
}

TrainConfig tiny_config() {
    TrainConfig c;
    c.prefill_episodes = 40;
    c.decay_episodes = 60;
    c.final_episodes = 10;
    c.batch = 32;
    c.hidden = {16, 8};
    c.seed = 3;
    return c;
}

GridSpec small_grid() {
    GridSpec g;
    g.n_power = 4;
    g.n_beamwidth = 4;
    return g;
}

double chi_square(const std::vector<int>& counts, const std::vector<double>& probs, int total) {
    double chi = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        const double e = probs[k] * total;
        chi += (counts[k] - e) * (counts[k] - e) / e;
    }
    return chi;
}

} // namespace

TEST(State, EncodesRatiosInDb) {
    const auto r = three_links();
    const auto s = encode_state(r, 0, 1e-9);
    // ITO: own tx toward rx 1, rx 2; IFO: tx 1, tx 2 toward own rx; noise
    expect_vec_near(s, {-20, -30, -10, -50, -30}, 1e-12);
    const auto s1 = encode_state(r, 1, 1e-9);
    expect_vec_near(s1, {-20, -50, -30, -70, -40}, 1e-12);
    EXPECT_EQ(s.size(), 5u);
    EXPECT_THROW(encode_state(r, 3, 1e-9), std::out_of_range);
}

TEST(State, ScaleInvariantUnderCommonGain) {
    auto r = three_links();
    const auto s = encode_state(r, 2, 1e-9);
    for (auto& row : r.gain)
        for (auto& g : row) g *= 1e3;
    const auto scaled = encode_state(r, 2, 1e-6);
    expect_vec_near(scaled, s, 1e-9);
}

TEST(State, AdaptPadsSmallerNetworks) {
    // N=3 state into an N=5 model
    const StateVector s{-20, -30, -10, -50, -30};
    expect_vec_near(adapt_state(s, 3, 5, -300), {-20, -30, -300, -300, -10, -50, -300, -300, -30}, 0);
}

TEST(State, AdaptKeepsStrongestInLargerNetworks) {
    // N=4 state into an N=2 model: keep the strongest entry of each block
    const StateVector s{-40, -10, -25, -5, -60, -30, 7};
    expect_vec_near(adapt_state(s, 4, 2, -300), {-10, -5, 7}, 0);
    expect_vec_near(adapt_state(s, 4, 3, -300), {-10, -25, -5, -30, 7}, 0);
}

TEST(State, AdaptIdentityAndErrors) {
    const StateVector s{1, 2, 3};
    EXPECT_EQ(adapt_state(s, 2, 2, -300), s);
    EXPECT_THROW(adapt_state(s, 3, 2, -300), std::invalid_argument);
    EXPECT_THROW(adapt_state(s, 2, 0, -300), std::invalid_argument);
    // N=1 model keeps only noise
    expect_vec_near(adapt_state(s, 2, 1, -300), {3}, 0);
}

TEST(Policy, GreedyTieBreakLowestIndex) {
    EXPECT_EQ(greedy_action(std::vector<double>{1, 3, 3, 2}), 1);
    EXPECT_EQ(greedy_action(std::vector<double>{5}), 0);
    EXPECT_THROW(greedy_action(std::vector<double>{}), std::invalid_argument);
}

TEST(Policy, ZeroEpsilonIsGreedyAndConsumesNoRandomness) {
    Rng a(4), b(4);
    EXPECT_EQ(select_action(std::vector<double>{0, 9, 1}, 0.0, a), 1);
    EXPECT_EQ(a(), b());
    EXPECT_THROW(select_action(std::vector<double>{1}, 1.5, a), std::invalid_argument);
}

TEST(Policy, FullExplorationUniform) {
    Rng rng(10);
    const int n = 30000;
    std::vector<int> counts(3, 0);
    for (int k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(select_action(std::vector<double>{0, 10, 0}, 1.0, rng))];
    // df = 2, p = 0.001
    EXPECT_LT(chi_square(counts, {1.0 / 3, 1.0 / 3, 1.0 / 3}, n), 13.8);
}

TEST(Policy, PartialExplorationMixture) {
    Rng rng(11);
    const int n = 30000;
    std::vector<int> counts(3, 0);
    for (int k = 0; k < n; ++k) ++counts[static_cast<std::size_t>(select_action(std::vector<double>{0, 10, 0}, 0.3, rng))];
    EXPECT_LT(chi_square(counts, {0.1, 0.8, 0.1}, n), 13.8);
}

TEST(Replay, FifoEviction) {
    ReplayBuffer buf(3);
    EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
    for (int k = 0; k < 5; ++k) buf.push({{double(k)}, k, double(k)});
    EXPECT_EQ(buf.size(), 3u);
    EXPECT_EQ(buf.at(0).action, 2);
    EXPECT_EQ(buf.at(1).action, 3);
    EXPECT_EQ(buf.at(2).action, 4);
}

TEST(Replay, SamplingCoversBufferUniformly) {
    ReplayBuffer buf(4);
    Rng rng(1);
    EXPECT_THROW(buf.sample_indices(1, rng), std::logic_error);
    for (int k = 0; k < 4; ++k) buf.push({{0.0}, k, 0.0});
    std::vector<int> counts(4, 0);
    for (auto i : buf.sample_indices(40000, rng)) ++counts[i];
    // df = 3, p = 0.001
    EXPECT_LT(chi_square(counts, {0.25, 0.25, 0.25, 0.25}, 40000), 16.27);
}

TEST(Schedule, EpsilonPhases) {
    TrainConfig c;
    c.prefill_episodes = 10;
    c.decay_episodes = 100;
    c.final_episodes = 5;
    c.epsilon_start = 0.2;
    EXPECT_EQ(epsilon_at(c, 0), 1.0);
    EXPECT_EQ(epsilon_at(c, 9), 1.0);
    EXPECT_EQ(epsilon_at(c, 10), 0.2);
    EXPECT_NEAR(epsilon_at(c, 60), 0.1, 1e-15);
    EXPECT_GT(epsilon_at(c, 109), 0.0);
    EXPECT_EQ(epsilon_at(c, 110), 0.0);
    EXPECT_EQ(epsilon_at(c, 114), 0.0);
}

TEST(Schedule, LearningRateDecaysGeometrically) {
    TrainConfig c;
    c.prefill_episodes = 10;
    c.decay_episodes = 50;
    c.final_episodes = 50;
    c.lr = 1e-3;
    c.lr_final = 1e-5;
    EXPECT_EQ(lr_at(c, 10), 1e-3);
    EXPECT_NEAR(lr_at(c, 60), 1e-4, 1e-15);
    EXPECT_NEAR(lr_at(c, 110), 1e-5, 1e-18);
    c.lr_final = c.lr;
    EXPECT_EQ(lr_at(c, 80), 1e-3);
}

TEST(Schedule, PadPercentile) {
    std::vector<double> v;
    for (int k = 0; k <= 100; ++k) v.push_back(-k);
    EXPECT_EQ(default_pad_db(v, 4), -99);
    EXPECT_EQ(default_pad_db(v, 1), -300);
}

TEST(Train, HistoryShapeAndSchedule) {
    const auto cfg = tiny_config();
    ScenarioConfig sc;
    sc.n_links = 3;
    const auto res = train(sc, RadioParams{}, build_grid(small_grid()), cfg);
    ASSERT_EQ(res.history.size(), 110u);
    EXPECT_TRUE(std::isnan(res.history[39].loss));
    EXPECT_TRUE(std::isfinite(res.history[40].loss));
    EXPECT_EQ(res.history.back().epsilon, 0.0);
    EXPECT_EQ(res.model.input_dim(), 5);
    EXPECT_EQ(res.model.output_dim(), 16);
    EXPECT_EQ(res.model.meta.n_links, 3);
    EXPECT_NEAR(res.model.meta.target_scale, 1.0 / (1e9 * 3), 1e-25);
    EXPECT_EQ(res.adam.step, 70u);
    double sum = 0;
    for (const auto& h : res.history) sum += h.reward;
    EXPECT_NEAR(res.history.back().running_mean, sum / 110, 1e-6 * sum / 110);

    std::ostringstream os;
    write_history_csv(os, res.history);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    std::getline(is, line);
    EXPECT_EQ(line, "episode,epsilon,reward,running_mean,loss");
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 110);
}

TEST(Train, RewardIsTheSharedSlotSumRate) {
    // Reproduce the first prefill episode from the documented streams.
    const auto cfg = tiny_config();
    ScenarioConfig sc;
    sc.n_links = 3;
    const RadioParams radio;
    const auto grid = build_grid(small_grid());
    const auto res = train(sc, radio, grid, cfg);

    Rng real_rng = make_rng(cfg.seed, Stream::train_realization, 0);
    const auto real = sample_realization(sc, real_rng);
    Rng explore = make_rng(cfg.seed, Stream::exploration);
    std::vector<int> actions;
    for (int i = 0; i < 3; ++i) actions.push_back(static_cast<int>(uniform_index(explore, 16)));
    EXPECT_EQ(res.history[0].reward, effective_sum_rate(real, grid.to_decision(actions), radio));
}

TEST(Train, Deterministic) {
    const auto cfg = tiny_config();
    ScenarioConfig sc;
    sc.n_links = 3;
    const auto a = train(sc, RadioParams{}, build_grid(small_grid()), cfg);
    const auto b = train(sc, RadioParams{}, build_grid(small_grid()), cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.adam, b.adam);
    std::ostringstream ha, hb;
    write_history_csv(ha, a.history);
    write_history_csv(hb, b.history);
    EXPECT_EQ(ha.str(), hb.str());

    auto other = cfg;
    other.seed = 4;
    EXPECT_NE(train(sc, RadioParams{}, build_grid(small_grid()), other).model.params, a.model.params);
}

TEST(Train, RejectsBadConfig) {
    auto cfg = tiny_config();
    cfg.batch = 0;
    EXPECT_THROW(train(ScenarioConfig{}, RadioParams{}, build_grid(GridSpec{}), cfg), std::invalid_argument);
}

TEST(Train, LearnedPolicyBeatsRandom) {
    TrainConfig cfg;
    cfg.prefill_episodes = 500;
    cfg.decay_episodes = 4000;
    cfg.final_episodes = 500;
    cfg.seed = 2;
    ScenarioConfig sc;
    sc.n_links = 4;
    const RadioParams radio;
    const auto grid = build_grid(small_grid(), radio);
    const auto res = train(sc, radio, grid, cfg);

    double dqn = 0, rnd = 0;
    Rng pol = make_rng(99, Stream::random_policy);
    for (int k = 0; k < 200; ++k) {
        Rng rr = make_rng(99, Stream::realization, static_cast<std::uint64_t>(k));
        const auto real = sample_realization(sc, rr);
        dqn += effective_sum_rate(real, act(res.model, real, radio, grid), radio);
        rnd += effective_sum_rate(real, random_policy(grid, 4, pol), radio);
    }
    EXPECT_GT(dqn, 1.3 * rnd);

    // reward trend: late episodes beat the prefill mean
    double early = 0, late = 0;
    for (int k = 0; k < 500; ++k) early += res.history[static_cast<std::size_t>(k)].reward;
    for (int k = 4500; k < 5000; ++k) late += res.history[static_cast<std::size_t>(k)].reward;
    EXPECT_GT(late, 1.2 * early);
}

TEST(Deploy, ActIsFeasibleDeterministicAndFast) {
    Rng rng(5);
    auto model = init_mlp({19, 128, 64, 64}, rng);
    model.meta.n_links = 10;
    model.meta.pad_db = -40;
    const RadioParams radio;
    const auto grid = build_grid(GridSpec{}, radio);
    ScenarioConfig sc;
    Rng rr(8);
    const auto real = sample_realization(sc, rr);

    const auto d1 = act(model, real, radio, grid);
    const auto d2 = act(model, real, radio, grid);
    EXPECT_EQ(d1.power, d2.power);
    EXPECT_EQ(d1.beamwidth, d2.beamwidth);
    EXPECT_TRUE(feasible(d1, radio));

    double worst_ms = 0;
    for (int k = 0; k < 50; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)act_indices(model, real, radio);
        const auto t1 = std::chrono::steady_clock::now();
        worst_ms = std::max(worst_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    EXPECT_LT(worst_ms, 10.0);

    GridSpec other;
    other.n_power = 4;
    EXPECT_THROW(act(model, real, radio, build_grid(other)), std::invalid_argument);
}

TEST(Deploy, DifferentNetworkSizes) {
    Rng rng(5);
    auto model = init_mlp({7, 8, 16}, rng);
    model.meta.n_links = 4;
    model.meta.pad_db = -40;
    const RadioParams radio;
    const auto grid = build_grid(small_grid(), radio);
    for (int n : {1, 2, 4, 9}) {
        ScenarioConfig sc;
        sc.n_links = n;
        Rng rr(static_cast<std::uint64_t>(n));
        const auto real = sample_realization(sc, rr);
        const auto d = act(model, real, radio, grid);
        EXPECT_EQ(d.size(), n);
        EXPECT_TRUE(feasible(d, radio));
    }
}
