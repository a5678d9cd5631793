#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "channel.hpp"
#include "units.hpp"

namespace mmwbeam {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Slot-level radio constants. The slot is normalized to one second, so the
/// objective in bits/s and bits/slot coincide numerically.
struct RadioParams {
    double bandwidth_w = 1e9;                        // Hz
    double noise_density = dbm_to_watts(-145.0);     // W/Hz
    double slot_t = 1.0;                             // s
    double pilot_tp = 0.001;                         // s per beam pair probed
    double sector_tx = deg_to_rad(90.0);
    double sector_rx = deg_to_rad(90.0);
    double side_lobe_z = 0.1;
    double p_max = dbm_to_watts(30.0);               // W

    double noise_power() const { return bandwidth_w * noise_density; }

    void validate() const {
        if (!(bandwidth_w > 0 && noise_density > 0)) throw std::invalid_argument("radio: bandwidth and noise density must be positive");
        if (!(pilot_tp > 0 && pilot_tp < slot_t)) throw std::invalid_argument("radio: need 0 < pilot_tp < slot_t");
        if (!(side_lobe_z > 0 && side_lobe_z < 1)) throw std::invalid_argument("radio: side_lobe_z must be in (0,1)");
        if (!(sector_tx > 0 && sector_tx <= two_pi && sector_rx > 0 && sector_rx <= two_pi))
            throw std::invalid_argument("radio: sectors must be in (0, 2pi]");
        if (!(p_max > 0)) throw std::invalid_argument("radio: p_max must be positive");
    }
};

/// Per-link transmit power and beamwidth for one slot. Transmitter and
/// receiver of a link use the same beamwidth.
struct Decision {
    std::vector<double> power;     // W
    std::vector<double> beamwidth; // rad

    int size() const { return static_cast<int>(power.size()); }

    friend bool operator==(const Decision&, const Decision&) = default;
};

/// Beam-level search time: ceil(psi_t/phi_t) * ceil(psi_r/phi_r) * T_p.
inline double alignment_time(double phi_t, double phi_r, const RadioParams& p) {
    if (!(phi_t > 0 && phi_r > 0)) throw std::domain_error("alignment_time: beamwidth must be positive");
    return std::ceil(p.sector_tx / phi_t) * std::ceil(p.sector_rx / phi_r) * p.pilot_tp;
}

inline double main_lobe_gain(double phi, double z) { return (two_pi - (two_pi - phi) * z) / phi; }

/// Sector antenna: flat main lobe of width phi, constant side lobe z.
/// The main-lobe boundary |theta| == phi/2 is inclusive.
inline double antenna_gain(double theta, double phi, double z) {
    return std::abs(wrap_angle(theta)) <= phi / 2.0 ? main_lobe_gain(phi, z) : z;
}

namespace detail {

inline double direction(Point from, Point to) {
    const double dx = to.x - from.x;
    const double dy = to.y - from.y;
    if (dx == 0.0 && dy == 0.0) return 0.0;
    return std::atan2(dy, dx);
}

template <typename... Args>
std::string cat(const Args&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

} // namespace detail

/// Off-boresight angles of the interfering path tx_i -> rx_j. Transmitter i
/// steers at rx_i and receiver j steers at tx_j; returns the angle seen at
/// each end between the steering direction and the path.
inline std::pair<double, double> boresight_angles(const NetworkRealization& real, int i, int j) {
    if (i < 0 || j < 0 || i >= real.size() || j >= real.size())
        throw std::out_of_range("boresight_angles: link index");
    if (i == j) return {0.0, 0.0};
    const Point ti = real.tx[static_cast<std::size_t>(i)];
    const Point ri = real.rx[static_cast<std::size_t>(i)];
    const Point tj = real.tx[static_cast<std::size_t>(j)];
    const Point rj = real.rx[static_cast<std::size_t>(j)];
    const double theta_t = wrap_angle(detail::direction(ti, rj) - detail::direction(ti, ri));
    const double theta_r = wrap_angle(detail::direction(rj, ti) - detail::direction(rj, tj));
    return {theta_t, theta_r};
}

struct Feasibility {
    bool ok = true;
    std::vector<std::string> violations;

    explicit operator bool() const { return ok; }
};

/// Checks every constraint family of the joint problem and lists each
/// violation rather than stopping at the first.
inline Feasibility feasible(const Decision& dec, const RadioParams& p) {
    Feasibility f;
    auto fail = [&f](std::string msg) {
        f.ok = false;
        f.violations.push_back(std::move(msg));
    };
    const int n = dec.size();
    if (static_cast<int>(dec.beamwidth.size()) != n) {
        fail("power and beamwidth vectors differ in length");
        return f;
    }
    const double bound = p.sector_tx * p.sector_rx * p.pilot_tp / p.slot_t;
    for (int i = 0; i < n; ++i) {
        const double phi = dec.beamwidth[static_cast<std::size_t>(i)];
        const double pw = dec.power[static_cast<std::size_t>(i)];
        if (!(phi > 0)) fail(detail::cat("link ", i, ": beamwidth ", phi, " not positive"));
        if (phi > p.sector_tx) fail(detail::cat("link ", i, ": tx beamwidth ", phi, " exceeds sector ", p.sector_tx));
        if (phi > p.sector_rx) fail(detail::cat("link ", i, ": rx beamwidth ", phi, " exceeds sector ", p.sector_rx));
        if (!(pw >= 0 && pw <= p.p_max)) fail(detail::cat("link ", i, ": power ", pw, " outside [0, ", p.p_max, "]"));
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double prod = dec.beamwidth[static_cast<std::size_t>(i)] * dec.beamwidth[static_cast<std::size_t>(j)];
            if (!(bound <= prod))
                fail(detail::cat("links (", i, ",", j, "): alignment bound ", bound, " exceeds phi_i*phi_j ", prod));
        }
    return f;
}

/// Precomputes the per-realization geometry so repeated objective
/// evaluations (search, training) cost O(N^2) multiplications and no trig.
class SlotEvaluator {
public:
    SlotEvaluator(const NetworkRealization& real, const RadioParams& radio)
        : real_(&real), radio_(radio), n_(real.size()) {
        theta_t_.assign(static_cast<std::size_t>(n_ * n_), 0.0);
        theta_r_.assign(static_cast<std::size_t>(n_ * n_), 0.0);
        for (int k = 0; k < n_; ++k)
            for (int i = 0; i < n_; ++i) {
                const auto [tt, tr] = boresight_angles(real, k, i);
                theta_t_[idx(k, i)] = tt;
                theta_r_[idx(k, i)] = tr;
            }
    }

    int size() const { return n_; }
    const RadioParams& radio() const { return radio_; }

    double sinr(int i, const Decision& dec) const {
        const double z = radio_.side_lobe_z;
        const auto ui = static_cast<std::size_t>(i);
        const double g_own = main_lobe_gain(dec.beamwidth[ui], z);
        const double signal = dec.power[ui] * g_own * g_own * real_->gain[ui][ui];
        double interference = 0.0;
        for (int k = 0; k < n_; ++k) {
            if (k == i) continue;
            const auto uk = static_cast<std::size_t>(k);
            const double gt = antenna_gain(theta_t_[idx(k, i)], dec.beamwidth[uk], z);
            const double gr = antenna_gain(theta_r_[idx(k, i)], dec.beamwidth[ui], z);
            interference += dec.power[uk] * gt * gr * real_->gain[uk][ui];
        }
        return signal / (interference + radio_.noise_power());
    }

    // Objective without the feasibility check; callers guarantee feasibility.
    double sum_rate_unchecked(const Decision& dec) const {
        double total = 0.0;
        for (int i = 0; i < n_; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const double tau = alignment_time(dec.beamwidth[ui], dec.beamwidth[ui], radio_);
            const double frac = std::clamp(1.0 - tau / radio_.slot_t, 0.0, 1.0);
            total += frac * std::log2(1.0 + sinr(i, dec));
        }
        return radio_.bandwidth_w * radio_.slot_t * total;
    }

    double sum_rate(const Decision& dec) const {
        check(dec);
        return sum_rate_unchecked(dec);
    }

    void check(const Decision& dec) const {
        if (dec.size() != n_) throw std::invalid_argument("decision size does not match realization");
        if (auto f = feasible(dec, radio_); !f) {
            std::string msg = "infeasible decision:";
            for (const auto& v : f.violations) msg += "\n  " + v;
            throw std::invalid_argument(msg);
        }
    }

private:
    std::size_t idx(int k, int i) const { return static_cast<std::size_t>(k * n_ + i); }

    const NetworkRealization* real_;
    RadioParams radio_;
    int n_;
    std::vector<double> theta_t_;
    std::vector<double> theta_r_;
};

inline double sinr(int i, const NetworkRealization& real, const Decision& dec, const RadioParams& radio) {
    if (dec.size() != real.size()) throw std::invalid_argument("decision size does not match realization");
    if (i < 0 || i >= real.size()) throw std::out_of_range("sinr: link index");
    return SlotEvaluator(real, radio).sinr(i, dec);
}

/// Alignment-discounted network throughput in bits per slot. Throws on an
/// infeasible decision.
inline double effective_sum_rate(const NetworkRealization& real, const Decision& dec, const RadioParams& radio) {
    return SlotEvaluator(real, radio).sum_rate(dec);
}

} // namespace mmwbeam
