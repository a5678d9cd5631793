#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"
#include "units.hpp"

namespace mmwbeam {

/// Distance-dependent LoS/NLoS pathloss with Nakagami fading on NLoS links.
/// Gains are linear power ratios; defaults are the 28 GHz urban constants.
struct ChannelParams {
    double c_los = db_to_linear(-60.0);
    double alpha_los = 2.0;
    double c_nlos = db_to_linear(-70.0);
    double alpha_nlos = 4.0;
    double beta = 0.006;      // 1/m
    double nakagami_m = 3.0;
    double ref_dist = 5.0;    // m
    double carrier_hz = 28e9; // metadata only

    void validate() const {
        if (!(c_los > 0 && alpha_los > 0 && c_nlos > 0 && alpha_nlos > 0 && beta >= 0))
            throw std::invalid_argument("channel: gains, exponents must be positive and beta non-negative");
        if (alpha_nlos < alpha_los)
            throw std::invalid_argument("channel: alpha_nlos must be >= alpha_los");
        if (!(nakagami_m >= 0.5)) throw std::invalid_argument("channel: nakagami_m must be >= 0.5");
        if (!(ref_dist > 0)) throw std::invalid_argument("channel: ref_dist must be > 0");
    }
};

struct ScenarioConfig {
    int n_links = 10;
    double side_len = 20.0; // m
    ChannelParams channel{};
    std::uint64_t seed = 1;
    // Maximum transmitter-receiver separation within a pair; 0 places
    // receivers independently of their transmitters.
    double max_pair_dist = 0.0;

    void validate() const {
        if (n_links < 1) throw std::invalid_argument("scenario: n_links must be >= 1");
        if (!(side_len > 0)) throw std::invalid_argument("scenario: side_len must be > 0");
        if (max_pair_dist < 0) throw std::invalid_argument("scenario: max_pair_dist must be >= 0");
        channel.validate();
    }
};

struct Point {
    double x = 0;
    double y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// One random drop. gain[i][j] is the channel power gain from transmitter i
/// to receiver j; no symmetry between (i,j) and (j,i).
struct NetworkRealization {
    std::vector<Point> tx;
    std::vector<Point> rx;
    std::vector<std::vector<double>> gain;
    std::vector<std::vector<bool>> los;
    double side_len = 0;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(tx.size()); }

    friend bool operator==(const NetworkRealization&, const NetworkRealization&) = default;
};

inline double pathloss(double r, bool los, const ChannelParams& p) {
    if (!(r > 0)) throw std::domain_error("pathloss: distance must be positive");
    const double d = std::max(r, p.ref_dist);
    return los ? p.c_los * std::pow(d, -p.alpha_los) : p.c_nlos * std::pow(d, -p.alpha_nlos);
}

/// Probability that a link of length r is line-of-sight.
inline double blockage_prob(double r, double beta) { return std::exp(-beta * r); }

/// Unit-mean Nakagami-m power gain, i.e. Gamma(shape m, scale 1/m).
inline double sample_fading(double m, Rng& rng) {
    std::gamma_distribution<double> gamma(m, 1.0 / m);
    return gamma(rng);
}

namespace detail {

inline Point uniform_point(double side, Rng& rng) {
    const double x = side * uniform01(rng);
    const double y = side * uniform01(rng);
    return {x, y};
}

inline Point receiver_near(Point tx, double side, double max_d, Rng& rng) {
    // rejection: uniform in the disc around tx, clipped to the square
    for (;;) {
        const double dx = (2.0 * uniform01(rng) - 1.0) * max_d;
        const double dy = (2.0 * uniform01(rng) - 1.0) * max_d;
        if (dx * dx + dy * dy > max_d * max_d) continue;
        const Point p{tx.x + dx, tx.y + dy};
        if (p.x >= 0 && p.x <= side && p.y >= 0 && p.y <= side) return p;
    }
}

} // namespace detail

inline NetworkRealization sample_realization(const ScenarioConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto n = static_cast<std::size_t>(cfg.n_links);
    NetworkRealization real;
    real.side_len = cfg.side_len;
    real.seed = cfg.seed;
    real.tx.resize(n);
    real.rx.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        real.tx[i] = detail::uniform_point(cfg.side_len, rng);
        real.rx[i] = cfg.max_pair_dist > 0
                         ? detail::receiver_near(real.tx[i], cfg.side_len, cfg.max_pair_dist, rng)
                         : detail::uniform_point(cfg.side_len, rng);
    }
    real.gain.assign(n, std::vector<double>(n, 0.0));
    real.los.assign(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            // coincident points fall back to the reference distance
            double r = distance(real.tx[i], real.rx[j]);
            if (!(r > 0)) r = cfg.channel.ref_dist;
            const bool los = uniform01(rng) < blockage_prob(r, cfg.channel.beta);
            double g = pathloss(r, los, cfg.channel);
            if (!los) g *= sample_fading(cfg.channel.nakagami_m, rng);
            // Gamma draws can underflow to 0 for tiny probabilities
            g = std::max(g, std::numeric_limits<double>::min());
            real.gain[i][j] = g;
            real.los[i][j] = los;
        }
    }
    return real;
}

// Text dump for debugging and cross-implementation diffs:
//
//   N L seed
//   tx_x tx_y rx_x rx_y          (N lines)
//   g[i][0] ... g[i][N-1]        (N lines, row i = transmitter i)
//   los[i][0] ... los[i][N-1]    (N lines of 0/1)
//
// Floating point values use 17 significant digits so a dump reloads bit-exactly.
inline void write_realization(std::ostream& os, const NetworkRealization& real) {
    const int n = real.size();
    const auto old_prec = os.precision(17);
    os << n << ' ' << real.side_len << ' ' << real.seed << '\n';
    for (int i = 0; i < n; ++i)
        os << real.tx[i].x << ' ' << real.tx[i].y << ' ' << real.rx[i].x << ' ' << real.rx[i].y << '\n';
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) os << (j ? " " : "") << real.gain[i][j];
        os << '\n';
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) os << (j ? " " : "") << (real.los[i][j] ? 1 : 0);
        os << '\n';
    }
    os.precision(old_prec);
}

inline NetworkRealization read_realization(std::istream& is) {
    NetworkRealization real;
    int n = 0;
    if (!(is >> n >> real.side_len >> real.seed) || n < 1)
        throw std::runtime_error("realization: bad header line");
    const auto un = static_cast<std::size_t>(n);
    real.tx.resize(un);
    real.rx.resize(un);
    for (auto i = 0u; i < un; ++i)
        if (!(is >> real.tx[i].x >> real.tx[i].y >> real.rx[i].x >> real.rx[i].y))
            throw std::runtime_error("realization: truncated position block");
    real.gain.assign(un, std::vector<double>(un));
    real.los.assign(un, std::vector<bool>(un));
    for (auto i = 0u; i < un; ++i)
        for (auto j = 0u; j < un; ++j)
            if (!(is >> real.gain[i][j]) || !(real.gain[i][j] > 0) || !std::isfinite(real.gain[i][j]))
                throw std::runtime_error("realization: bad gain entry");
    for (auto i = 0u; i < un; ++i)
        for (auto j = 0u; j < un; ++j) {
            int b = 0;
            if (!(is >> b) || (b != 0 && b != 1)) throw std::runtime_error("realization: bad los entry");
            real.los[i][j] = b == 1;
        }
    return real;
}

inline std::string to_text(const NetworkRealization& real) {
    std::ostringstream os;
    write_realization(os, real);
    return os.str();
}

} // namespace mmwbeam
