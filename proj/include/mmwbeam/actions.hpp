#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radio.hpp"

namespace mmwbeam {

enum class GridScheme {
    reciprocal_square, // powers uniform in watts, 1/phi^2 uniform
    uniform,           // powers uniform in watts, phi uniform in radians
};

inline std::string_view to_string(GridScheme s) {
    return s == GridScheme::reciprocal_square ? "reciprocal-square" : "uniform";
}

inline GridScheme parse_scheme(std::string_view s) {
    if (s == "reciprocal-square") return GridScheme::reciprocal_square;
    if (s == "uniform") return GridScheme::uniform;
    throw std::invalid_argument("unknown grid scheme '" + std::string(s) + "'");
}

struct GridSpec {
    int n_power = 8;
    int n_beamwidth = 8;
    double p_min = dbm_to_watts(2.0);
    double p_max = dbm_to_watts(30.0);
    double phi_min = deg_to_rad(3.0);
    double phi_max = deg_to_rad(30.0);
    GridScheme scheme = GridScheme::reciprocal_square;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Discrete (power, beamwidth) menu. Action index a maps to
/// powers[a / n_beamwidth] and beamwidths[a % n_beamwidth] (power-major).
/// Both lists are ascending, so index 0 is (p_min, phi_min) and the last
/// index is (p_max, phi_max).
struct ActionGrid {
    GridSpec spec;
    std::vector<double> powers;
    std::vector<double> beamwidths;

    int size() const { return static_cast<int>(powers.size() * beamwidths.size()); }
    int n_power() const { return static_cast<int>(powers.size()); }
    int n_beamwidth() const { return static_cast<int>(beamwidths.size()); }

    std::pair<double, double> decode(int index) const {
        if (index < 0 || index >= size()) throw std::out_of_range("action index " + std::to_string(index) + " outside grid");
        const auto nb = beamwidths.size();
        const auto u = static_cast<std::size_t>(index);
        return {powers[u / nb], beamwidths[u % nb]};
    }

    int encode(int power_idx, int beam_idx) const {
        if (power_idx < 0 || power_idx >= n_power() || beam_idx < 0 || beam_idx >= n_beamwidth())
            throw std::out_of_range("grid coordinates outside grid");
        return power_idx * n_beamwidth() + beam_idx;
    }

    Decision to_decision(const std::vector<int>& actions) const {
        Decision d;
        d.power.reserve(actions.size());
        d.beamwidth.reserve(actions.size());
        for (int a : actions) {
            const auto [p, phi] = decode(a);
            d.power.push_back(p);
            d.beamwidth.push_back(phi);
        }
        return d;
    }
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    const double step = (hi - lo) / (n - 1);
    for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = lo + k * step;
    v.front() = lo;
    v.back() = hi;
    return v;
}

} // namespace detail

inline ActionGrid build_grid(const GridSpec& spec) {
    if (spec.n_power < 2 || spec.n_beamwidth < 2) throw std::invalid_argument("grid: need at least 2 values per axis");
    if (!(spec.p_min >= 0 && spec.p_min < spec.p_max)) throw std::invalid_argument("grid: need 0 <= p_min < p_max");
    if (!(spec.phi_min > 0 && spec.phi_min < spec.phi_max)) throw std::invalid_argument("grid: need 0 < phi_min < phi_max");

    ActionGrid g;
    g.spec = spec;
    g.powers = detail::linspace(spec.p_min, spec.p_max, spec.n_power);
    if (spec.scheme == GridScheme::uniform) {
        g.beamwidths = detail::linspace(spec.phi_min, spec.phi_max, spec.n_beamwidth);
    } else {
        // u = 1/phi^2 uniform; walk u from high to low so phi ascends
        const double u_hi = 1.0 / (spec.phi_min * spec.phi_min);
        const double u_lo = 1.0 / (spec.phi_max * spec.phi_max);
        const int n = spec.n_beamwidth;
        g.beamwidths.resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const double u = u_hi - k * (u_hi - u_lo) / (n - 1);
            g.beamwidths[static_cast<std::size_t>(k)] = 1.0 / std::sqrt(u);
        }
        g.beamwidths.front() = spec.phi_min;
        g.beamwidths.back() = spec.phi_max;
    }
    return g;
}

inline ActionGrid build_grid(int n_p, int n_phi, double p_min, double p_max, double phi_min, double phi_max,
                             GridScheme scheme) {
    return build_grid(GridSpec{n_p, n_phi, p_min, p_max, phi_min, phi_max, scheme});
}

/// Throws unless every cell is individually feasible and the narrowest
/// beam paired with itself meets the alignment-time bound, which makes any
/// joint decision drawn from the grid feasible.
inline void validate_grid(const ActionGrid& g, const RadioParams& radio) {
    Decision worst{{g.powers.front(), g.powers.back()}, {g.beamwidths.front(), g.beamwidths.back()}};
    if (auto f = feasible(worst, radio); !f) {
        std::string msg = "action grid incompatible with radio parameters:";
        for (const auto& v : f.violations) msg += "\n  " + v;
        throw std::invalid_argument(msg);
    }
}

inline ActionGrid build_grid(const GridSpec& spec, const RadioParams& radio) {
    ActionGrid g = build_grid(spec);
    validate_grid(g, radio);
    return g;
}

} // namespace mmwbeam
