#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "actions.hpp"
#include "radio.hpp"
#include "rng.hpp"

namespace mmwbeam {

inline std::vector<int> random_indices(const ActionGrid& grid, int n, Rng& rng) {
    std::vector<int> a(static_cast<std::size_t>(n));
    for (auto& x : a) x = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(grid.size())));
    return a;
}

inline Decision random_policy(const ActionGrid& grid, int n, Rng& rng) {
    return grid.to_decision(random_indices(grid, n, rng));
}

struct SearchResult {
    Decision decision;
    std::vector<int> actions;
    double value = 0; // bits/slot
};

inline constexpr std::uint64_t default_search_budget = std::uint64_t{1} << 22;

/// Number of joint actions, or 0 if it overflows the budget.
inline std::uint64_t joint_action_count(int grid_size, int n, std::uint64_t budget) {
    std::uint64_t total = 1;
    for (int i = 0; i < n; ++i) {
        if (total > budget / static_cast<std::uint64_t>(grid_size)) return 0;
        total *= static_cast<std::uint64_t>(grid_size);
    }
    return total;
}

/// Joint exhaustive search over the grid. Ties keep the lexicographically
/// smallest action tuple (link 0 most significant).
inline SearchResult exhaustive_search(const NetworkRealization& real, const ActionGrid& grid, const RadioParams& radio,
                                      std::uint64_t budget = default_search_budget) {
    const int n = real.size();
    const std::uint64_t total = joint_action_count(grid.size(), n, budget);
    if (total == 0 || total > budget)
        throw std::invalid_argument("exhaustive search over " + std::to_string(grid.size()) + "^" + std::to_string(n) +
                                    " joint actions exceeds budget of " + std::to_string(budget));
    validate_grid(grid, radio);

    const SlotEvaluator eval(real, radio);
    std::vector<int> cur(static_cast<std::size_t>(n), 0);
    Decision dec = grid.to_decision(cur);
    SearchResult best{dec, cur, eval.sum_rate_unchecked(dec)};
    for (std::uint64_t step = 1; step < total; ++step) {
        // odometer increment, last link fastest
        for (int i = n - 1; i >= 0; --i) {
            auto& a = cur[static_cast<std::size_t>(i)];
            if (++a < grid.size()) {
                const auto [p, phi] = grid.decode(a);
                dec.power[static_cast<std::size_t>(i)] = p;
                dec.beamwidth[static_cast<std::size_t>(i)] = phi;
                break;
            }
            a = 0;
            dec.power[static_cast<std::size_t>(i)] = grid.powers.front();
            dec.beamwidth[static_cast<std::size_t>(i)] = grid.beamwidths.front();
        }
        const double v = eval.sum_rate_unchecked(dec);
        if (v > best.value) best = {dec, cur, v};
    }
    return best;
}

/// Interference-free single-link objective (1 - tau/T) * log2(1 + SNR) at
/// full power, as seen by the per-link decomposition baseline.
inline double isolated_link_rate(double phi, double own_gain, double power, const RadioParams& radio) {
    const double g = main_lobe_gain(phi, radio.side_lobe_z);
    const double snr = power * g * g * own_gain / radio.noise_power();
    const double frac = std::max(0.0, 1.0 - alignment_time(phi, phi, radio) / radio.slot_t);
    return frac * std::log2(1.0 + snr);
}

/// Underestimation-of-interference baseline: each link ignores all other
/// links, transmits at p_max and picks the beamwidth maximizing its own
/// alignment-discounted rate over `resolution` evenly spaced values in
/// [phi_min, sector]. Reads only the diagonal of the gain matrix.
inline Decision underestimate_interference(const NetworkRealization& real, const RadioParams& radio, int resolution,
                                           double phi_min = deg_to_rad(3.0)) {
    if (resolution < 2) throw std::invalid_argument("underestimate_interference: resolution must be >= 2");
    radio.validate();
    const double sector = std::min(radio.sector_tx, radio.sector_rx);
    // keep every pairwise alignment bound satisfied
    const double lo = std::max(phi_min, std::sqrt(radio.sector_tx * radio.sector_rx * radio.pilot_tp / radio.slot_t));
    if (!(lo < sector)) throw std::invalid_argument("underestimate_interference: empty beamwidth range");

    const int n = real.size();
    Decision d;
    d.power.assign(static_cast<std::size_t>(n), radio.p_max);
    d.beamwidth.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double own = real.gain[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        double best_phi = lo;
        double best = -1.0;
        for (int k = 0; k < resolution; ++k) {
            const double phi = k + 1 == resolution ? sector : lo + k * (sector - lo) / (resolution - 1);
            const double r = isolated_link_rate(phi, own, radio.p_max, radio);
            if (r > best) {
                best = r;
                best_phi = phi;
            }
        }
        d.beamwidth[static_cast<std::size_t>(i)] = best_phi;
    }
    return d;
}

} // namespace mmwbeam
