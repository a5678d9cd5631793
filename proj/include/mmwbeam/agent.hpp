#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "actions.hpp"
#include "channel.hpp"
#include "nn.hpp"
#include "radio.hpp"
#include "rng.hpp"

namespace mmwbeam {

/// Per-link observation, in dB: N-1 outgoing interference ratios (ITO),
/// N-1 incoming interference ratios (IFO), then the noise ratio. Every
/// entry is normalized by the link's own channel gain.
using StateVector = std::vector<double>;

inline StateVector encode_state(const NetworkRealization& real, int i, double noise_power) {
    const int n = real.size();
    if (i < 0 || i >= n) throw std::out_of_range("encode_state: link index");
    const auto ui = static_cast<std::size_t>(i);
    const double own = real.gain[ui][ui];
    if (!(own > 0)) throw std::domain_error("encode_state: own-link gain must be positive");
    StateVector s;
    s.reserve(static_cast<std::size_t>(2 * n - 1));
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j)
        if (j != ui) s.push_back(linear_to_db(real.gain[ui][j] / own));
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j)
        if (j != ui) s.push_back(linear_to_db(real.gain[j][ui] / own));
    s.push_back(linear_to_db(noise_power / own));
    return s;
}

/// Resizes a state built for `n_actual` links to a network trained for
/// `n_model` links: pads each interference block with `pad_db` when the
/// network is smaller, keeps the strongest `n_model - 1` entries of each
/// block (descending) when it is larger.
inline StateVector adapt_state(const StateVector& s, int n_actual, int n_model, double pad_db) {
    if (n_actual < 1 || n_model < 1) throw std::invalid_argument("adapt_state: link counts must be >= 1");
    if (static_cast<int>(s.size()) != 2 * n_actual - 1) throw std::invalid_argument("adapt_state: state length is not 2N-1");
    if (n_actual == n_model) return s;

    const auto k_in = static_cast<std::ptrdiff_t>(n_actual - 1);
    const auto k_out = static_cast<std::size_t>(n_model - 1);
    std::vector<double> ito(s.begin(), s.begin() + k_in);
    std::vector<double> ifo(s.begin() + k_in, s.begin() + 2 * k_in);
    auto fit = [&](std::vector<double>& block) {
        if (block.size() < k_out) {
            block.resize(k_out, pad_db);
        } else {
            std::sort(block.begin(), block.end(), std::greater<>{});
            block.resize(k_out);
        }
    };
    fit(ito);
    fit(ifo);
    StateVector out;
    out.reserve(2 * k_out + 1);
    out.insert(out.end(), ito.begin(), ito.end());
    out.insert(out.end(), ifo.begin(), ifo.end());
    out.push_back(s.back());
    return out;
}

/// Argmax with lowest-index tie-break.
inline int greedy_action(std::span<const double> q) {
    if (q.empty()) throw std::invalid_argument("greedy_action: empty value vector");
    return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

/// Epsilon-greedy. Consumes randomness only when epsilon > 0.
inline int select_action(std::span<const double> q, double epsilon, Rng& rng) {
    if (q.empty()) throw std::invalid_argument("select_action: empty value vector");
    if (!(epsilon >= 0 && epsilon <= 1)) throw std::invalid_argument("select_action: epsilon outside [0,1]");
    if (epsilon > 0 && (epsilon >= 1 || uniform01(rng) < epsilon))
        return static_cast<int>(uniform_index(rng, q.size()));
    return greedy_action(q);
}

struct Transition {
    StateVector state;
    int action = 0;
    double reward = 0; // bits per slot, shared by every link of the episode
};

/// FIFO ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity, 1u << 20));
    }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }

    // i = 0 is the oldest surviving transition
    const Transition& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

    std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
        if (empty()) throw std::logic_error("sampling from an empty replay buffer");
        std::vector<std::size_t> idx(count);
        for (auto& k : idx) k = static_cast<std::size_t>(uniform_index(rng, items_.size()));
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> items_;
};

struct TrainConfig {
    int prefill_episodes = 2000;
    int decay_episodes = 100000;
    int final_episodes = 10000;
    double epsilon_start = 0.2;
    int batch = 256;
    double lr = 1e-3;
    // Learning rate decays geometrically from lr to lr_final over the
    // post-prefill episodes; lr_final == lr keeps it constant.
    double lr_final = 1e-5;
    std::size_t buffer_capacity = 50000;
    std::uint64_t seed = 1;
    // Filler for absent interferers when a model meets a smaller network.
    // Unset: the 1st percentile of interference entries seen while
    // prefilling, i.e. a weak but in-distribution interferer.
    std::optional<double> pad_db;
    std::vector<int> hidden{128, 64};
    // Q targets are reward * target_scale; 0 selects 1/(W*N), i.e. the
    // mean per-link spectral efficiency in bit/s/Hz.
    double target_scale = 0.0;

    int total_episodes() const { return prefill_episodes + decay_episodes + final_episodes; }

    void validate() const {
        if (prefill_episodes < 1 || decay_episodes < 1 || final_episodes < 0)
            throw std::invalid_argument("train: episode counts must be positive");
        if (!(epsilon_start >= 0 && epsilon_start <= 1)) throw std::invalid_argument("train: epsilon_start outside [0,1]");
        if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
        if (!(lr > 0 && lr_final > 0)) throw std::invalid_argument("train: lr and lr_final must be positive");
        if (buffer_capacity < 1) throw std::invalid_argument("train: buffer capacity must be positive");
        if (target_scale < 0) throw std::invalid_argument("train: target_scale must be >= 0");
        for (int h : hidden)
            if (h < 1) throw std::invalid_argument("train: hidden widths must be positive");
    }
};

/// Adam step size for a 0-based episode index.
inline double lr_at(const TrainConfig& cfg, int episode) {
    const int learning = cfg.decay_episodes + cfg.final_episodes;
    const int k = std::clamp(episode - cfg.prefill_episodes, 0, learning);
    if (cfg.lr_final == cfg.lr) return cfg.lr;
    return cfg.lr * std::pow(cfg.lr_final / cfg.lr, static_cast<double>(k) / learning);
}

/// Exploration rate for a 0-based episode index: 1 while prefilling, linear
/// decay from epsilon_start to exactly 0 across the decay phase, then 0.
inline double epsilon_at(const TrainConfig& cfg, int episode) {
    if (episode < cfg.prefill_episodes) return 1.0;
    const int k = episode - cfg.prefill_episodes;
    if (k >= cfg.decay_episodes) return 0.0;
    return cfg.epsilon_start * (1.0 - static_cast<double>(k) / cfg.decay_episodes);
}

struct EpisodeRecord {
    int episode = 0;
    double epsilon = 0;
    double reward = 0;       // bits/slot
    double running_mean = 0; // mean reward over episodes [0, episode]
    double loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    MlpModel model;
    AdamState adam;
    std::vector<EpisodeRecord> history;
};

/// 1st percentile of observed interference ratios; -300 dB when a single
/// link leaves nothing to observe.
inline double default_pad_db(std::vector<double> interference_db, int n_links) {
    if (n_links < 2 || interference_db.empty()) return -300.0;
    const auto k = static_cast<std::size_t>(0.01 * static_cast<double>(interference_db.size() - 1));
    std::nth_element(interference_db.begin(), interference_db.begin() + static_cast<std::ptrdiff_t>(k), interference_db.end());
    return interference_db[k];
}

inline Eigen::MatrixXd stack_states(const std::vector<StateVector>& states) {
    const auto rows = static_cast<Eigen::Index>(states.front().size());
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(states.size()));
    for (std::size_t c = 0; c < states.size(); ++c)
        x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(states[c].data(), rows);
    return x;
}

/// Offline training with a discount of zero: every transition is a
/// one-step regression of the shared slot reward onto Q(s_i, a_i).
/// One episode is one fresh realization; each link acts on its own state
/// through the same network.
inline TrainResult train(const ScenarioConfig& scenario, const RadioParams& radio, const ActionGrid& grid,
                         const TrainConfig& cfg,
                         const std::function<void(const EpisodeRecord&)>& progress = {}) {
    scenario.validate();
    radio.validate();
    cfg.validate();
    validate_grid(grid, radio);

    const int n = scenario.n_links;
    std::vector<int> dims{2 * n - 1};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(grid.size());

    Rng init_rng = make_rng(cfg.seed, Stream::init);
    Rng explore_rng = make_rng(cfg.seed, Stream::exploration);
    Rng replay_rng = make_rng(cfg.seed, Stream::replay);

    TrainResult res;
    res.model = init_mlp(dims, init_rng);
    res.model.meta = ModelMeta{n, grid.spec, cfg.pad_db.value_or(0.0),
                               cfg.target_scale > 0 ? cfg.target_scale : 1.0 / (radio.bandwidth_w * n)};
    std::vector<double> interference_db;
    res.adam = AdamState(res.model.params.size(), cfg.lr);
    res.history.reserve(static_cast<std::size_t>(cfg.total_episodes()));

    ReplayBuffer buffer(cfg.buffer_capacity);
    const double noise = radio.noise_power();
    double reward_sum = 0.0;
    std::vector<StateVector> states(static_cast<std::size_t>(n));
    std::vector<int> actions(static_cast<std::size_t>(n));
    Batch batch;
    batch.states.resize(dims.front(), cfg.batch);
    batch.actions.resize(static_cast<std::size_t>(cfg.batch));
    batch.targets.resize(static_cast<std::size_t>(cfg.batch));

    for (int ep = 0; ep < cfg.total_episodes(); ++ep) {
        ScenarioConfig sc = scenario;
        sc.seed = cfg.seed;
        Rng real_rng = make_rng(cfg.seed, Stream::train_realization, static_cast<std::uint64_t>(ep));
        const NetworkRealization real = sample_realization(sc, real_rng);

        const double eps = epsilon_at(cfg, ep);
        for (int i = 0; i < n; ++i) states[static_cast<std::size_t>(i)] = encode_state(real, i, noise);
        if (eps >= 1.0) {
            const std::vector<double> dummy(static_cast<std::size_t>(grid.size()), 0.0);
            for (auto& a : actions) a = select_action(dummy, 1.0, explore_rng);
        } else {
            const Eigen::MatrixXd q = forward_batch(res.model, stack_states(states));
            for (int i = 0; i < n; ++i) {
                const double* col = q.data() + static_cast<std::ptrdiff_t>(i) * q.rows();
                actions[static_cast<std::size_t>(i)] =
                    select_action(std::span<const double>(col, static_cast<std::size_t>(q.rows())), eps, explore_rng);
            }
        }
        const double reward = SlotEvaluator(real, radio).sum_rate_unchecked(grid.to_decision(actions));
        for (int i = 0; i < n; ++i)
            buffer.push({states[static_cast<std::size_t>(i)], actions[static_cast<std::size_t>(i)], reward});
        if (!cfg.pad_db && ep < cfg.prefill_episodes) {
            for (const auto& st : states) interference_db.insert(interference_db.end(), st.begin(), st.end() - 1);
            if (ep + 1 == cfg.prefill_episodes) res.model.meta.pad_db = default_pad_db(interference_db, n);
        }

        EpisodeRecord rec;
        rec.episode = ep;
        rec.epsilon = eps;
        rec.reward = reward;
        reward_sum += reward;
        rec.running_mean = reward_sum / (ep + 1);

        if (ep >= cfg.prefill_episodes) {
            const auto idx = buffer.sample_indices(static_cast<std::size_t>(cfg.batch), replay_rng);
            for (int k = 0; k < cfg.batch; ++k) {
                const Transition& t = buffer.at(idx[static_cast<std::size_t>(k)]);
                batch.states.col(k) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), dims.front());
                batch.actions[static_cast<std::size_t>(k)] = t.action;
                batch.targets[static_cast<std::size_t>(k)] = t.reward * res.model.meta.target_scale;
            }
            res.adam.lr = lr_at(cfg, ep);
            rec.loss = train_step(res.model, res.adam, batch);
        }
        res.history.push_back(rec);
        if (progress) progress(rec);
    }
    return res;
}

/// Deployment: each link encodes its state, adapts it to the trained size,
/// and takes the greedy action of the shared network.
inline std::vector<int> act_indices(const MlpModel& model, const NetworkRealization& real, const RadioParams& radio) {
    const int n = real.size();
    const int n_model = model.meta.n_links;
    if (model.input_dim() != 2 * n_model - 1) throw std::invalid_argument("act: model input dim is not 2N-1");
    std::vector<StateVector> states(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        states[static_cast<std::size_t>(i)] =
            adapt_state(encode_state(real, i, radio.noise_power()), n, n_model, model.meta.pad_db);
    const Eigen::MatrixXd q = forward_batch(model, stack_states(states));
    std::vector<int> actions(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* col = q.data() + static_cast<std::ptrdiff_t>(i) * q.rows();
        actions[static_cast<std::size_t>(i)] = greedy_action(std::span<const double>(col, static_cast<std::size_t>(q.rows())));
    }
    return actions;
}

inline Decision act(const MlpModel& model, const NetworkRealization& real, const RadioParams& radio,
                    const ActionGrid& grid) {
    if (grid.size() != model.output_dim()) throw std::invalid_argument("act: grid size does not match model outputs");
    return grid.to_decision(act_indices(model, real, radio));
}

inline void write_history_csv(std::ostream& os, const std::vector<EpisodeRecord>& history) {
    const auto old = os.precision(17);
    os << "episode,epsilon,reward,running_mean,loss\n";
    for (const auto& r : history) {
        os << r.episode << ',' << r.epsilon << ',' << r.reward << ',' << r.running_mean << ',';
        if (std::isfinite(r.loss)) os << r.loss;
        os << '\n';
    }
    os.precision(old);
}

} // namespace mmwbeam
