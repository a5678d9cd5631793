#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "agent.hpp"
#include "baselines.hpp"
#include "config.hpp"

namespace mmwbeam {

enum class Policy { es, random, dqn, underestimate };

inline std::string_view to_string(Policy p) {
    switch (p) {
    case Policy::es: return "es";
    case Policy::random: return "random";
    case Policy::dqn: return "dqn";
    case Policy::underestimate: return "underestimate";
    }
    return "?";
}

inline Policy parse_policy(std::string_view s) {
    for (Policy p : {Policy::es, Policy::random, Policy::dqn, Policy::underestimate})
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown policy '" + std::string(s) + "' (expected es, random, dqn, underestimate)");
}

inline std::vector<Policy> parse_policies(std::string_view list) {
    std::vector<Policy> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto item = detail::trim(list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) {
            const Policy p = parse_policy(item);
            if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty policy list");
    return out;
}

/// Runs fn(0..count-1) on up to `threads` workers. Work items must write
/// only to their own slot; the first exception is rethrown.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Realization for trial k: a pure function of the master seed and k, so
/// every policy in an evaluation sees the same networks.
inline NetworkRealization trial_realization(const ScenarioConfig& scenario, std::uint64_t seed, int trial) {
    Rng rng = make_rng(seed, Stream::realization, static_cast<std::uint64_t>(trial));
    ScenarioConfig sc = scenario;
    sc.seed = seed;
    return sample_realization(sc, rng);
}

struct PolicySummary {
    Policy policy{};
    double mean = 0;
    double stderr_ = 0;
    double mean_ms = 0;
    double median_ms = 0;
};

struct EvalReport {
    std::vector<Policy> policies;
    std::vector<std::vector<double>> values;  // [policy][trial], bits/slot
    std::vector<std::vector<double>> seconds; // [policy][trial], wall time per decision
    std::vector<PolicySummary> summary;

    int trials() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }

    const PolicySummary& of(Policy p) const {
        for (const auto& s : summary)
            if (s.policy == p) return s;
        throw std::out_of_range("policy not in report: " + std::string(to_string(p)));
    }
};

inline std::pair<double, double> mean_and_stderr(const std::vector<double>& v) {
    const auto n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1) / n)};
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Evaluates `policies` on cfg.trials common realizations. `model` is
/// required when Policy::dqn is requested; it acts on its own grid and is
/// adapted to the scenario's link count if that differs from its own.
inline EvalReport evaluate(const ExperimentConfig& cfg, const std::vector<Policy>& policies,
                           const MlpModel* model = nullptr) {
    cfg.validate();
    const ActionGrid grid = build_grid(cfg.grid, cfg.radio);
    const int n = cfg.scenario.n_links;
    std::optional<ActionGrid> model_grid;
    for (Policy p : policies) {
        if (p == Policy::es && joint_action_count(grid.size(), n, cfg.es_budget) == 0)
            throw std::invalid_argument("exhaustive search needs " + std::to_string(grid.size()) + "^" + std::to_string(n) +
                                        " joint actions, above the cap eval.es_budget = " + std::to_string(cfg.es_budget));
        if (p == Policy::dqn) {
            if (!model) throw std::invalid_argument("policy dqn requested without a model");
            model_grid = build_grid(model->meta.grid, cfg.radio);
            if (model_grid->size() != model->output_dim())
                throw std::invalid_argument("model output layer does not match its grid");
        }
    }

    EvalReport rep;
    rep.policies = policies;
    rep.values.assign(policies.size(), std::vector<double>(static_cast<std::size_t>(cfg.trials)));
    rep.seconds = rep.values;

    using clock = std::chrono::steady_clock;
    parallel_for(cfg.trials, cfg.threads, [&](int k) {
        const NetworkRealization real = trial_realization(cfg.scenario, cfg.seed, k);
        const SlotEvaluator evaluator(real, cfg.radio);
        for (std::size_t pi = 0; pi < policies.size(); ++pi) {
            const auto t0 = clock::now();
            Decision d;
            double value = 0;
            switch (policies[pi]) {
            case Policy::es: {
                auto r = exhaustive_search(real, grid, cfg.radio, cfg.es_budget);
                d = std::move(r.decision);
                value = r.value;
                break;
            }
            case Policy::random: {
                Rng rng = make_rng(cfg.seed, Stream::random_policy, static_cast<std::uint64_t>(k));
                d = random_policy(grid, n, rng);
                break;
            }
            case Policy::dqn: d = act(*model, real, cfg.radio, *model_grid); break;
            case Policy::underestimate:
                d = underestimate_interference(real, cfg.radio, cfg.underestimate_resolution, cfg.grid.phi_min);
                break;
            }
            const auto t1 = clock::now();
            if (policies[pi] != Policy::es) value = evaluator.sum_rate(d);
            rep.values[pi][static_cast<std::size_t>(k)] = value;
            rep.seconds[pi][static_cast<std::size_t>(k)] = std::chrono::duration<double>(t1 - t0).count();
        }
    });

    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
        const auto [mean, se] = mean_and_stderr(rep.values[pi]);
        const auto [tmean, tse] = mean_and_stderr(rep.seconds[pi]);
        (void)tse;
        rep.summary.push_back({policies[pi], mean, se, 1e3 * tmean, 1e3 * median(rep.seconds[pi])});
    }
    return rep;
}

inline void write_config_comment(std::ostream& os, const ExperimentConfig& cfg) {
    os << "# config_hash=" << config_hash_hex(cfg) << '\n';
}

// Per-trial values. Timing is kept out of this file so reruns are
// byte-identical.
inline void write_trials_csv(std::ostream& os, const EvalReport& rep, const ExperimentConfig& cfg) {
    write_config_comment(os, cfg);
    const auto old = os.precision(17);
    os << "trial";
    for (Policy p : rep.policies) os << ',' << to_string(p);
    os << '\n';
    for (int k = 0; k < rep.trials(); ++k) {
        os << k;
        for (const auto& v : rep.values) os << ',' << v[static_cast<std::size_t>(k)];
        os << '\n';
    }
    os.precision(old);
}

inline void write_summary_csv(std::ostream& os, const EvalReport& rep, const ExperimentConfig& cfg) {
    write_config_comment(os, cfg);
    const auto old = os.precision(17);
    const bool have_es = std::find(rep.policies.begin(), rep.policies.end(), Policy::es) != rep.policies.end();
    os << "policy,trials,mean_bits_per_slot,stderr" << (have_es ? ",percent_of_es" : "") << '\n';
    for (const auto& s : rep.summary) {
        os << to_string(s.policy) << ',' << rep.trials() << ',' << s.mean << ',' << s.stderr_;
        if (have_es) os << ',' << 100.0 * s.mean / rep.of(Policy::es).mean;
        os << '\n';
    }
    os.precision(old);
}

inline void write_timing_csv(std::ostream& os, const EvalReport& rep, const ExperimentConfig& cfg) {
    write_config_comment(os, cfg);
    os << "policy,samples,mean_ms,median_ms\n";
    for (const auto& s : rep.summary)
        os << to_string(s.policy) << ',' << rep.trials() << ',' << s.mean_ms << ',' << s.median_ms << '\n';
}

enum class SweepAxis { n_links, side_len };

inline SweepAxis parse_axis(std::string_view s) {
    if (s == "n_links") return SweepAxis::n_links;
    if (s == "side_len") return SweepAxis::side_len;
    throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "' (expected n_links or side_len)");
}

inline std::string_view to_string(SweepAxis a) { return a == SweepAxis::n_links ? "n_links" : "side_len"; }

inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis, double value) {
    if (axis == SweepAxis::n_links) {
        if (value < 1 || value != std::floor(value)) throw std::invalid_argument("n_links sweep values must be positive integers");
        cfg.scenario.n_links = static_cast<int>(value);
    } else {
        if (!(value > 0)) throw std::invalid_argument("side_len sweep values must be positive");
        cfg.scenario.side_len = value;
    }
    return cfg;
}

struct SweepRow {
    double value = 0;
    PolicySummary stats;
};

/// Trains a model for `cfg` (used when a sweep is not reusing one model).
inline TrainResult train_for(const ExperimentConfig& cfg,
                             const std::function<void(const EpisodeRecord&)>& progress = {}) {
    cfg.validate();
    return train(cfg.scenario, cfg.radio, build_grid(cfg.grid, cfg.radio), cfg.train, progress);
}

/// One evaluation per axis value. With `reuse` the same model serves every
/// point through state adaptation; otherwise a model is trained per point.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                                   const std::vector<Policy>& policies, const MlpModel* reuse = nullptr,
                                   const std::function<void(double)>& on_point = {}) {
    std::vector<SweepRow> rows;
    const bool need_dqn = std::find(policies.begin(), policies.end(), Policy::dqn) != policies.end();
    for (double v : values) {
        if (on_point) on_point(v);
        const ExperimentConfig cfg = with_axis_value(base, axis, v);
        std::optional<MlpModel> trained;
        const MlpModel* model = reuse;
        if (need_dqn && !reuse) {
            trained = train_for(cfg).model;
            model = &*trained;
        }
        const EvalReport rep = evaluate(cfg, policies, model);
        for (const auto& s : rep.summary) rows.push_back({v, s});
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, SweepAxis axis,
                            const ExperimentConfig& cfg) {
    write_config_comment(os, cfg);
    const auto old = os.precision(17);
    os << to_string(axis) << ",policy,mean_bits_per_slot,stderr\n";
    for (const auto& r : rows) os << r.value << ',' << to_string(r.stats.policy) << ',' << r.stats.mean << ',' << r.stats.stderr_ << '\n';
    os.precision(old);
}

struct AblationResult {
    TrainResult reciprocal_square;
    TrainResult uniform;
};

/// Trains the same configuration under both discretization schemes with
/// identical seeds.
inline AblationResult ablate_grid(const ExperimentConfig& base) {
    ExperimentConfig a = base;
    a.grid.scheme = GridScheme::reciprocal_square;
    ExperimentConfig b = base;
    b.grid.scheme = GridScheme::uniform;
    return {train_for(a), train_for(b)};
}

inline void write_ablation_csv(std::ostream& os, const AblationResult& r, const ExperimentConfig& cfg) {
    write_config_comment(os, cfg);
    const auto old = os.precision(17);
    os << "episode,epsilon,reward_reciprocal_square,running_mean_reciprocal_square,reward_uniform,running_mean_uniform\n";
    const auto& h1 = r.reciprocal_square.history;
    const auto& h2 = r.uniform.history;
    for (std::size_t k = 0; k < h1.size(); ++k)
        os << h1[k].episode << ',' << h1[k].epsilon << ',' << h1[k].reward << ',' << h1[k].running_mean << ','
           << h2[k].reward << ',' << h2[k].running_mean << '\n';
    os.precision(old);
}

struct TimingRow {
    int n_links = 0;
    Policy policy{};
    int samples = 0;
    double mean_ms = 0;
    double median_ms = 0;
};

/// Single-threaded per-decision latency of DQN inference, the
/// underestimation baseline, and (where within budget) exhaustive search.
inline std::vector<TimingRow> time_policies(const ExperimentConfig& base, const MlpModel& model,
                                            const std::vector<int>& link_counts = {4, 10}, int samples = 200) {
    if (samples < 1) throw std::invalid_argument("timing: samples must be >= 1");
    std::vector<TimingRow> rows;
    for (int n : link_counts) {
        ExperimentConfig cfg = base;
        cfg.scenario.n_links = n;
        cfg.trials = samples;
        cfg.threads = 1;
        std::vector<Policy> policies{Policy::dqn, Policy::underestimate};
        // exhaustive search only where it finishes in reasonable time
        if (joint_action_count(build_grid(cfg.grid, cfg.radio).size(), n, std::min<std::uint64_t>(cfg.es_budget, 1u << 17)) != 0)
            policies.push_back(Policy::es);
        const EvalReport rep = evaluate(cfg, policies, &model);
        for (const auto& s : rep.summary) rows.push_back({n, s.policy, samples, s.mean_ms, s.median_ms});
    }
    return rows;
}

inline void write_timing_rows(std::ostream& os, const std::vector<TimingRow>& rows) {
    os << "n_links,policy,samples,mean_ms,median_ms\n";
    for (const auto& r : rows)
        os << r.n_links << ',' << to_string(r.policy) << ',' << r.samples << ',' << r.mean_ms << ',' << r.median_ms << '\n';
}

} // namespace mmwbeam
