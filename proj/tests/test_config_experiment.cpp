#include <gtest/gtest.h>

#include <mmwbeam/config.hpp>
#include <mmwbeam/experiment.hpp>

#include <sstream>

using namespace mmwbeam;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is, "test.cfg");
}

std::string config_error(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

ExperimentConfig small_eval() {
    ExperimentConfig cfg;
    cfg.scenario.n_links = 2;
    cfg.grid.n_power = 4;
    cfg.grid.n_beamwidth = 4;
    cfg.trials = 40;
    cfg.threads = 3;
    cfg.seed = 5;
    cfg.resolve();
    return cfg;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

} // namespace

TEST(Config, DefaultsAndPlainKeys) {
    const auto cfg = parse("seed = 9\nscenario.n_links = 6\ngrid.scheme = uniform\n");
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.scenario.seed, 9u);
    EXPECT_EQ(cfg.train.seed, 9u);
    EXPECT_EQ(cfg.scenario.n_links, 6);
    EXPECT_EQ(cfg.grid.scheme, GridScheme::uniform);
    EXPECT_EQ(cfg.trials, 500);
    EXPECT_DOUBLE_EQ(cfg.radio.p_max, 1.0);
}

TEST(Config, SectionsCommentsAndUnits) {
    const auto cfg = parse("# experiment\n[grid]\nn_power = 4   # fewer powers\nphi_min_deg = 5\n\n[train]\n"
                           "hidden = 32, 16\npad_db = -50\n[radio]\np_max_dbm = 20\n");
    EXPECT_EQ(cfg.grid.n_power, 4);
    EXPECT_NEAR(cfg.grid.phi_min, deg_to_rad(5), 1e-15);
    EXPECT_EQ(cfg.train.hidden, (std::vector<int>{32, 16}));
    ASSERT_TRUE(cfg.train.pad_db.has_value());
    EXPECT_EQ(*cfg.train.pad_db, -50);
    EXPECT_NEAR(cfg.radio.p_max, 0.1, 1e-15);
    EXPECT_FALSE(parse("train.pad_db = auto\n").train.pad_db.has_value());
}

TEST(Config, ErrorsNameTheLine) {
    EXPECT_EQ(config_error("seed = 1\nbogus.key = 3\n").rfind("test.cfg:2:", 0), 0u);
    EXPECT_NE(config_error("seed = 1\n\nscenario.n_links = ten\n").find("test.cfg:3:"), std::string::npos);
    EXPECT_NE(config_error("[grid\n").find("test.cfg:1:"), std::string::npos);
    EXPECT_NE(config_error("seed\n").find("test.cfg:1:"), std::string::npos);
    EXPECT_NE(config_error("seed =\n").find("test.cfg:1:"), std::string::npos);
    EXPECT_NE(config_error("grid.scheme = log\n").find("scheme"), std::string::npos);
}

TEST(Config, TextRoundTrip) {
    auto cfg = parse("seed = 4\nscenario.side_len_m = 35\ngrid.n_beamwidth = 5\ntrain.pad_db = -12.5\nchannel.beta_per_m = 0.01\n");
    const auto again = parse(config_to_text(cfg));
    EXPECT_EQ(config_to_text(again), config_to_text(cfg));
    EXPECT_EQ(config_hash(again), config_hash(cfg));
    EXPECT_EQ(again.scenario.side_len, 35);
    EXPECT_EQ(again.scenario.channel.beta, 0.01);
}

TEST(Config, DumpUsesShortestExactValues) {
    const auto text = config_to_text(ExperimentConfig{});
    EXPECT_NE(text.find("grid.phi_max_deg = 30  # deg\n"), std::string::npos);
    EXPECT_NE(text.find("channel.beta_per_m = 0.006  # 1/m\n"), std::string::npos);
    EXPECT_NE(text.find("radio.bandwidth_hz = 1000000000  # Hz\n"), std::string::npos);
    EXPECT_EQ(config_hash(parse(text)), config_hash(parse("")));
}

TEST(Config, HashIgnoresOutputAndThreads) {
    auto a = parse("seed = 1\n");
    auto b = parse("seed = 1\noutput.dir = elsewhere\neval.threads = 7\n");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_NE(config_hash(a), config_hash(parse("seed = 2\n")));
    EXPECT_EQ(config_hash_hex(a).size(), 16u);
}

TEST(Config, ValidationCatchesIncompatibleGrid) {
    auto cfg = parse("grid.p_max_dbm = 33\n");
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    EXPECT_NO_THROW(parse("").validate());
}

TEST(Experiment, PolicyNames) {
    EXPECT_EQ(parse_policies("es,random,dqn,underestimate"),
              (std::vector<Policy>{Policy::es, Policy::random, Policy::dqn, Policy::underestimate}));
    EXPECT_THROW(parse_policy("greedy"), std::invalid_argument);
    EXPECT_EQ(parse_axis("side_len"), SweepAxis::side_len);
    EXPECT_THROW(parse_axis("power"), std::invalid_argument);
}

TEST(Experiment, ParallelForCoversEveryIndexOnce) {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 8, [&](int k) { ++hits[static_cast<std::size_t>(k)]; });
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Experiment, CommonRealizationsAcrossPolicies) {
    const auto cfg = small_eval();
    const auto a = trial_realization(cfg.scenario, cfg.seed, 3);
    const auto b = trial_realization(cfg.scenario, cfg.seed, 3);
    EXPECT_EQ(a, b);
    EXPECT_FALSE(a == trial_realization(cfg.scenario, cfg.seed, 4));
}

TEST(Experiment, SummaryAgreesWithTrials) {
    const auto cfg = small_eval();
    const auto rep = evaluate(cfg, {Policy::es, Policy::random, Policy::underestimate});
    ASSERT_EQ(rep.trials(), 40);
    for (std::size_t p = 0; p < 3; ++p) {
        double sum = 0;
        for (double v : rep.values[p]) sum += v;
        EXPECT_NEAR(rep.summary[p].mean, sum / 40, 1e-9 * sum / 40);
    }
    // exhaustive search dominates the random grid policy trial by trial
    for (int k = 0; k < 40; ++k) EXPECT_GE(rep.values[0][static_cast<std::size_t>(k)], rep.values[1][static_cast<std::size_t>(k)]);
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
    auto cfg = small_eval();
    const auto a = evaluate(cfg, {Policy::es, Policy::random});
    cfg.threads = 1;
    const auto b = evaluate(cfg, {Policy::es, Policy::random});
    EXPECT_EQ(a.values, b.values);
}

TEST(Experiment, CsvHeadersAndHash) {
    const auto cfg = small_eval();
    const auto rep = evaluate(cfg, {Policy::es, Policy::random});
    std::ostringstream trials, summary, timing;
    write_trials_csv(trials, rep, cfg);
    write_summary_csv(summary, rep, cfg);
    write_timing_csv(timing, rep, cfg);
    const auto t = lines(trials.str());
    EXPECT_EQ(t[0], "# config_hash=" + config_hash_hex(cfg));
    EXPECT_EQ(t[1], "trial,es,random");
    EXPECT_EQ(t.size(), 42u);
    const auto s = lines(summary.str());
    EXPECT_EQ(s[1], "policy,trials,mean_bits_per_slot,stderr,percent_of_es");
    EXPECT_EQ(s[2].rfind("es,40,", 0), 0u);
    EXPECT_EQ(s[2].substr(s[2].rfind(',') + 1), "100");
    EXPECT_EQ(lines(timing.str())[1], "policy,samples,mean_ms,median_ms");
}

TEST(Experiment, RerunsAreByteIdentical) {
    const auto cfg = small_eval();
    std::ostringstream a, b;
    write_trials_csv(a, evaluate(cfg, {Policy::es, Policy::random, Policy::underestimate}), cfg);
    write_trials_csv(b, evaluate(cfg, {Policy::es, Policy::random, Policy::underestimate}), cfg);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Experiment, SearchBudgetErrorNamesTheKey) {
    auto cfg = small_eval();
    cfg.scenario.n_links = 10;
    try {
        evaluate(cfg, {Policy::es});
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("eval.es_budget"), std::string::npos);
    }
    EXPECT_THROW(evaluate(small_eval(), {Policy::dqn}), std::invalid_argument);
}

TEST(Experiment, DqnModelOnOtherLinkCounts) {
    auto cfg = small_eval();
    cfg.train.prefill_episodes = 20;
    cfg.train.decay_episodes = 30;
    cfg.train.final_episodes = 0;
    cfg.train.batch = 16;
    cfg.train.hidden = {8};
    const auto model = train_for(cfg).model;
    const auto rows = sweep(cfg, SweepAxis::n_links, {1, 3}, {Policy::dqn, Policy::random}, &model);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].value, 1);
    EXPECT_EQ(rows[0].stats.policy, Policy::dqn);
    std::ostringstream os;
    write_sweep_csv(os, rows, SweepAxis::n_links, cfg);
    EXPECT_EQ(lines(os.str())[1], "n_links,policy,mean_bits_per_slot,stderr");
}

TEST(Experiment, HistoryHasOneRowPerEpisode) {
    auto cfg = small_eval();
    cfg.train.prefill_episodes = 20;
    cfg.train.decay_episodes = 30;
    cfg.train.final_episodes = 5;
    cfg.train.batch = 16;
    cfg.train.hidden = {8};
    const auto res = train_for(cfg);
    std::ostringstream os;
    write_history_csv(os, res.history);
    EXPECT_EQ(lines(os.str()).size(), 56u);
}

TEST(Experiment, AblationIdenticalWhenGridsCoincide) {
    // With two beamwidths both schemes produce {phi_min, phi_max}, so the
    // two runs must be identical episode by episode.
    auto cfg = small_eval();
    cfg.grid.n_beamwidth = 2;
    cfg.train.prefill_episodes = 20;
    cfg.train.decay_episodes = 30;
    cfg.train.final_episodes = 5;
    cfg.train.batch = 16;
    cfg.train.hidden = {8};
    const auto r = ablate_grid(cfg);
    ASSERT_EQ(r.uniform.history.size(), r.reciprocal_square.history.size());
    for (std::size_t k = 0; k < r.uniform.history.size(); ++k)
        EXPECT_EQ(r.uniform.history[k].reward, r.reciprocal_square.history[k].reward);
}

TEST(Experiment, AblationCsvShape) {
    auto cfg = small_eval();
    cfg.train.prefill_episodes = 20;
    cfg.train.decay_episodes = 10;
    cfg.train.final_episodes = 0;
    cfg.train.batch = 16;
    cfg.train.hidden = {8};
    const auto r = ablate_grid(cfg);
    std::ostringstream os;
    write_ablation_csv(os, r, cfg);
    const auto l = lines(os.str());
    EXPECT_EQ(l[1], "episode,epsilon,reward_reciprocal_square,running_mean_reciprocal_square,reward_uniform,running_mean_uniform");
    EXPECT_EQ(l.size(), 32u);
}
