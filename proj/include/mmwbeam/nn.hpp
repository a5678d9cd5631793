#pragma once

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "actions.hpp"
#include "rng.hpp"

namespace mmwbeam {

/// Metadata carried by a saved Q-network so it can be deployed without the
/// training configuration.
struct ModelMeta {
    int n_links = 0;           // trained-for link count; input dim is 2N-1
    GridSpec grid{};           // action semantics of the output layer
    double pad_db = -300.0;    // state filler for absent interferers
    double target_scale = 1.0; // Q outputs are reward * target_scale

    friend bool operator==(const ModelMeta&, const ModelMeta&) = default;
};

/// Fully connected ReLU network with a linear output layer. Parameters live
/// in one flat vector: for each layer, the (out x in) column-major weight
/// matrix followed by the bias.
struct MlpModel {
    std::vector<int> dims;
    std::vector<double> params;
    ModelMeta meta;

    int n_layers() const { return static_cast<int>(dims.size()) - 1; }
    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }

    std::size_t weight_offset(int layer) const {
        std::size_t off = 0;
        for (int l = 0; l < layer; ++l) off += layer_size(l);
        return off;
    }
    std::size_t layer_size(int l) const {
        const auto in = static_cast<std::size_t>(dims[static_cast<std::size_t>(l)]);
        const auto out = static_cast<std::size_t>(dims[static_cast<std::size_t>(l) + 1]);
        return out * in + out;
    }

    Eigen::Map<const Eigen::MatrixXd> weight(int l) const {
        return {params.data() + weight_offset(l), dims[static_cast<std::size_t>(l) + 1], dims[static_cast<std::size_t>(l)]};
    }
    Eigen::Map<Eigen::MatrixXd> weight(int l) {
        return {params.data() + weight_offset(l), dims[static_cast<std::size_t>(l) + 1], dims[static_cast<std::size_t>(l)]};
    }
    Eigen::Map<const Eigen::VectorXd> bias(int l) const {
        const auto out = dims[static_cast<std::size_t>(l) + 1];
        return {params.data() + weight_offset(l) + static_cast<std::size_t>(out * dims[static_cast<std::size_t>(l)]), out};
    }
    Eigen::Map<Eigen::VectorXd> bias(int l) {
        const auto out = dims[static_cast<std::size_t>(l) + 1];
        return {params.data() + weight_offset(l) + static_cast<std::size_t>(out * dims[static_cast<std::size_t>(l)]), out};
    }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

inline std::size_t parameter_count(const std::vector<int>& dims) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        n += static_cast<std::size_t>(dims[l + 1]) * static_cast<std::size_t>(dims[l]) + static_cast<std::size_t>(dims[l + 1]);
    return n;
}

inline void validate_dims(const std::vector<int>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("mlp: need at least input and output dims");
    for (int d : dims)
        if (d < 1) throw std::invalid_argument("mlp: layer widths must be positive");
}

/// He-uniform weights on hidden layers, small uniform weights on the output
/// layer, zero biases.
inline MlpModel init_mlp(const std::vector<int>& dims, Rng& rng) {
    validate_dims(dims);
    MlpModel m;
    m.dims = dims;
    m.params.assign(parameter_count(dims), 0.0);
    for (int l = 0; l < m.n_layers(); ++l) {
        const double fan_in = dims[static_cast<std::size_t>(l)];
        const bool output = l + 1 == m.n_layers();
        const double bound = output ? 0.1 / std::sqrt(fan_in) : std::sqrt(6.0 / fan_in);
        auto w = m.weight(l);
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    }
    return m;
}

/// Batched forward pass; columns of `x` are inputs.
inline Eigen::MatrixXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& x) {
    if (x.rows() != m.input_dim()) throw std::invalid_argument("mlp: input dimension mismatch");
    Eigen::MatrixXd a = x;
    for (int l = 0; l < m.n_layers(); ++l) {
        Eigen::MatrixXd z = m.weight(l) * a;
        z.colwise() += m.bias(l);
        if (l + 1 < m.n_layers()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

inline std::vector<double> forward(const MlpModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.input_dim()) throw std::invalid_argument("mlp: input dimension mismatch");
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd q = forward_batch(m, in);
    return {q.data(), q.data() + q.size()};
}

/// Regression minibatch: loss touches only the output of the chosen action.
struct Batch {
    Eigen::MatrixXd states; // input_dim x B
    std::vector<int> actions;
    std::vector<double> targets;

    int size() const { return static_cast<int>(actions.size()); }
};

/// Mean squared error over chosen outputs and its exact gradient with
/// respect to the flat parameter vector.
inline double loss_and_gradient(const MlpModel& m, const Batch& batch, std::vector<double>& grad) {
    const int b = batch.size();
    if (b == 0) throw std::invalid_argument("mlp: empty batch");
    if (batch.states.cols() != b || static_cast<int>(batch.targets.size()) != b)
        throw std::invalid_argument("mlp: batch arrays disagree in length");
    if (batch.states.rows() != m.input_dim()) throw std::invalid_argument("mlp: input dimension mismatch");

    const int nl = m.n_layers();
    std::vector<Eigen::MatrixXd> acts(static_cast<std::size_t>(nl + 1));
    acts[0] = batch.states;
    for (int l = 0; l < nl; ++l) {
        Eigen::MatrixXd z = m.weight(l) * acts[static_cast<std::size_t>(l)];
        z.colwise() += m.bias(l);
        if (l + 1 < nl) z = z.cwiseMax(0.0);
        acts[static_cast<std::size_t>(l) + 1] = std::move(z);
    }

    const Eigen::MatrixXd& q = acts.back();
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double loss = 0.0;
    for (int k = 0; k < b; ++k) {
        const int a = batch.actions[static_cast<std::size_t>(k)];
        if (a < 0 || a >= m.output_dim()) throw std::out_of_range("mlp: action index outside output layer");
        const double err = q(a, k) - batch.targets[static_cast<std::size_t>(k)];
        loss += err * err;
        delta(a, k) = 2.0 * err / b;
    }
    loss /= b;

    grad.assign(m.params.size(), 0.0);
    for (int l = nl - 1; l >= 0; --l) {
        const auto off = m.weight_offset(l);
        const auto out = m.dims[static_cast<std::size_t>(l) + 1];
        const auto in = m.dims[static_cast<std::size_t>(l)];
        Eigen::Map<Eigen::MatrixXd> gw(grad.data() + off, out, in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + off + static_cast<std::size_t>(out * in), out);
        const Eigen::MatrixXd& prev = acts[static_cast<std::size_t>(l)];
        gw.noalias() = delta * prev.transpose();
        gb = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = m.weight(l).transpose() * delta;
            // ReLU derivative; stored activations are positive exactly where z > 0
            delta = back.cwiseProduct((prev.array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

inline double batch_loss(const MlpModel& m, const Batch& batch) {
    const Eigen::MatrixXd q = forward_batch(m, batch.states);
    double loss = 0.0;
    for (int k = 0; k < batch.size(); ++k) {
        const double err = q(batch.actions[static_cast<std::size_t>(k)], k) - batch.targets[static_cast<std::size_t>(k)];
        loss += err * err;
    }
    return loss / batch.size();
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0, double learning_rate = 1e-3)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam step on `params`.
inline void adam_update(std::span<double> params, std::span<const double> grad, AdamState& s) {
    if (params.size() != grad.size() || s.m.size() != params.size() || s.v.size() != params.size())
        throw std::invalid_argument("adam: state shape does not match parameters");
    ++s.step;
    const double t = static_cast<double>(s.step);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * grad[k];
        s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * grad[k] * grad[k];
        const double mhat = s.m[k] / c1;
        const double vhat = s.v[k] / c2;
        params[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

/// Returns the loss before the update. Non-finite loss aborts training.
inline double train_step(MlpModel& m, AdamState& adam, const Batch& batch) {
    std::vector<double> grad;
    const double loss = loss_and_gradient(m, batch, grad);
    if (!std::isfinite(loss)) throw std::runtime_error("mlp: non-finite loss, training diverged");
    adam_update(m.params, grad, adam);
    return loss;
}

// --- Serialization --------------------------------------------------------
//
// Little-endian binary, see docs/model_format.md:
//   magic "MMWBDQN\0" | u32 version | meta | u32 n_dims | u32 dims[] |
//   u64 n_params | f64 params[] | u8 has_adam | [adam block]

inline constexpr std::array<char, 8> model_magic{'M', 'M', 'W', 'B', 'D', 'Q', 'N', '\0'};
inline constexpr std::uint32_t model_format_version = 1;
// States are 10*log10 of gains normalized by the link's own gain.
inline constexpr std::uint32_t state_convention_db_ratio = 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> b{};
    for (int k = 0; k < 8; ++k) b[static_cast<std::size_t>(k)] = static_cast<char>((v >> (8 * k)) & 0xff);
    os.write(b.data(), 8);
}
inline void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<char, 4> b{};
    for (int k = 0; k < 4; ++k) b[static_cast<std::size_t>(k)] = static_cast<char>((v >> (8 * k)) & 0xff);
    os.write(b.data(), 4);
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& is, const char* what) {
    std::array<unsigned char, 8> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw std::runtime_error(std::string("model file truncated reading ") + what);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[static_cast<std::size_t>(k)];
    return v;
}
inline std::uint32_t get_u32(std::istream& is, const char* what) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error(std::string("model file truncated reading ") + what);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | b[static_cast<std::size_t>(k)];
    return v;
}
inline double get_f64(std::istream& is, const char* what) { return std::bit_cast<double>(get_u64(is, what)); }

} // namespace detail

inline void save_model(std::ostream& os, const MlpModel& m, const AdamState* adam = nullptr) {
    using namespace detail;
    os.write(model_magic.data(), model_magic.size());
    put_u32(os, model_format_version);
    put_u32(os, static_cast<std::uint32_t>(m.meta.n_links));
    put_u32(os, m.meta.grid.scheme == GridScheme::reciprocal_square ? 0u : 1u);
    put_u32(os, static_cast<std::uint32_t>(m.meta.grid.n_power));
    put_u32(os, static_cast<std::uint32_t>(m.meta.grid.n_beamwidth));
    put_f64(os, m.meta.grid.p_min);
    put_f64(os, m.meta.grid.p_max);
    put_f64(os, m.meta.grid.phi_min);
    put_f64(os, m.meta.grid.phi_max);
    put_f64(os, m.meta.pad_db);
    put_f64(os, m.meta.target_scale);
    put_u32(os, state_convention_db_ratio);
    put_u32(os, static_cast<std::uint32_t>(m.dims.size()));
    for (int d : m.dims) put_u32(os, static_cast<std::uint32_t>(d));
    put_u64(os, m.params.size());
    for (double p : m.params) put_f64(os, p);
    os.put(adam ? 1 : 0);
    if (adam) {
        put_u64(os, adam->step);
        put_f64(os, adam->lr);
        put_f64(os, adam->beta1);
        put_f64(os, adam->beta2);
        put_f64(os, adam->eps);
        for (double x : adam->m) put_f64(os, x);
        for (double x : adam->v) put_f64(os, x);
    }
    if (!os) throw std::runtime_error("failed writing model");
}

struct LoadedModel {
    MlpModel model;
    std::optional<AdamState> adam;
};

inline LoadedModel load_model(std::istream& is) {
    using namespace detail;
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != model_magic) throw std::runtime_error("not a model file (bad magic)");
    const auto version = get_u32(is, "version");
    if (version != model_format_version)
        throw std::runtime_error("unsupported model format version " + std::to_string(version));

    LoadedModel out;
    auto& m = out.model;
    m.meta.n_links = static_cast<int>(get_u32(is, "n_links"));
    const auto scheme = get_u32(is, "grid scheme");
    if (scheme > 1) throw std::runtime_error("model file: unknown grid scheme code " + std::to_string(scheme));
    m.meta.grid.scheme = scheme == 0 ? GridScheme::reciprocal_square : GridScheme::uniform;
    m.meta.grid.n_power = static_cast<int>(get_u32(is, "grid n_power"));
    m.meta.grid.n_beamwidth = static_cast<int>(get_u32(is, "grid n_beamwidth"));
    m.meta.grid.p_min = get_f64(is, "grid p_min");
    m.meta.grid.p_max = get_f64(is, "grid p_max");
    m.meta.grid.phi_min = get_f64(is, "grid phi_min");
    m.meta.grid.phi_max = get_f64(is, "grid phi_max");
    m.meta.pad_db = get_f64(is, "pad_db");
    m.meta.target_scale = get_f64(is, "target_scale");
    if (const auto conv = get_u32(is, "state convention"); conv != state_convention_db_ratio)
        throw std::runtime_error("model file: unknown state convention " + std::to_string(conv));

    const auto n_dims = get_u32(is, "dim count");
    if (n_dims < 2 || n_dims > 64) throw std::runtime_error("model file: implausible layer count " + std::to_string(n_dims));
    m.dims.resize(n_dims);
    for (auto& d : m.dims) {
        d = static_cast<int>(get_u32(is, "dims"));
        if (d < 1 || d > (1 << 20)) throw std::runtime_error("model file: implausible layer width");
    }
    const auto n_params = get_u64(is, "parameter count");
    if (n_params != parameter_count(m.dims)) throw std::runtime_error("model file: parameter count does not match dims");
    if (m.meta.n_links < 1 || m.input_dim() != 2 * m.meta.n_links - 1)
        throw std::runtime_error("model file: input dim does not match 2N-1");
    if (m.output_dim() != m.meta.grid.n_power * m.meta.grid.n_beamwidth)
        throw std::runtime_error("model file: output dim does not match grid size");
    m.params.resize(n_params);
    for (auto& p : m.params) {
        p = get_f64(is, "parameters");
        if (!std::isfinite(p)) throw std::runtime_error("model file: non-finite parameter");
    }
    const int flag = is.get();
    if (flag == std::char_traits<char>::eof()) throw std::runtime_error("model file truncated reading adam flag");
    if (flag == 1) {
        AdamState s(n_params);
        s.step = get_u64(is, "adam step");
        s.lr = get_f64(is, "adam lr");
        s.beta1 = get_f64(is, "adam beta1");
        s.beta2 = get_f64(is, "adam beta2");
        s.eps = get_f64(is, "adam eps");
        for (auto& x : s.m) x = get_f64(is, "adam moments");
        for (auto& x : s.v) x = get_f64(is, "adam moments");
        out.adam = std::move(s);
    } else if (flag != 0) {
        throw std::runtime_error("model file: bad adam flag");
    }
    return out;
}

inline void save_model(const std::string& path, const MlpModel& m, const AdamState* adam = nullptr) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_model(os, m, adam);
}

inline LoadedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file '" + path + "'");
    return load_model(is);
}

} // namespace mmwbeam
