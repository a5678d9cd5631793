#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "actions.hpp"
#include "agent.hpp"
#include "baselines.hpp"
#include "channel.hpp"
#include "radio.hpp"

namespace mmwbeam {

/// Everything one experiment needs. Defaults reproduce the reference
/// setup (28 GHz urban channel, 1 GHz bandwidth, 90 degree sectors, 8x8
/// reciprocal-square grid, 500 trials).
struct ExperimentConfig {
    ScenarioConfig scenario{};
    RadioParams radio{};
    GridSpec grid{};
    TrainConfig train{};
    int trials = 500;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::uint64_t es_budget = default_search_budget;
    int underestimate_resolution = 1000;
    int threads = 0; // 0: hardware concurrency

    // Pushes the master seed into the component configs.
    void resolve() {
        scenario.seed = seed;
        train.seed = seed;
    }

    void validate() const {
        scenario.validate();
        radio.validate();
        train.validate();
        if (trials < 1) throw std::invalid_argument("eval.trials must be >= 1");
        if (underestimate_resolution < 2) throw std::invalid_argument("eval.underestimate_resolution must be >= 2");
        if (grid.p_max > radio.p_max * (1 + 1e-12))
            throw std::invalid_argument("grid.p_max_dbm exceeds radio.p_max_dbm");
        build_grid(grid, radio);
    }
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view v) {
    const std::string s(v);
    std::size_t used = 0;
    double d = 0;
    try {
        d = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected a number, got '" + s + "'");
    }
    if (used != s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
    return d;
}

template <typename Int>
Int parse_int(std::string_view v) {
    Int x{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw std::invalid_argument("expected an integer, got '" + std::string(v) + "'");
    return x;
}

inline std::vector<int> parse_int_list(std::string_view v) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) out.push_back(parse_int<int>(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace detail

struct ConfigKey {
    std::string name;
    std::string unit;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

/// The full key table. Units are those of the text format; values are
/// converted to SI on the way in.
inline const std::vector<ConfigKey>& config_keys() {
    using detail::fmt_double;
    using detail::parse_double;
    using E = ExperimentConfig;
    using SV = std::string_view;
    static const std::vector<ConfigKey> keys = {
        {"seed", "", [](const E& c) { return std::to_string(c.seed); },
         [](E& c, SV v) { c.seed = detail::parse_int<std::uint64_t>(v); }},
        {"scenario.n_links", "", [](const E& c) { return std::to_string(c.scenario.n_links); },
         [](E& c, SV v) { c.scenario.n_links = detail::parse_int<int>(v); }},
        {"scenario.side_len_m", "m", [](const E& c) { return fmt_double(c.scenario.side_len); },
         [](E& c, SV v) { c.scenario.side_len = parse_double(v); }},
        {"scenario.max_pair_dist_m", "m, 0 = unconstrained", [](const E& c) { return fmt_double(c.scenario.max_pair_dist); },
         [](E& c, SV v) { c.scenario.max_pair_dist = parse_double(v); }},
        {"channel.c_los_db", "dB", [](const E& c) { return fmt_double(linear_to_db(c.scenario.channel.c_los)); },
         [](E& c, SV v) { c.scenario.channel.c_los = db_to_linear(parse_double(v)); }},
        {"channel.alpha_los", "", [](const E& c) { return fmt_double(c.scenario.channel.alpha_los); },
         [](E& c, SV v) { c.scenario.channel.alpha_los = parse_double(v); }},
        {"channel.c_nlos_db", "dB", [](const E& c) { return fmt_double(linear_to_db(c.scenario.channel.c_nlos)); },
         [](E& c, SV v) { c.scenario.channel.c_nlos = db_to_linear(parse_double(v)); }},
        {"channel.alpha_nlos", "", [](const E& c) { return fmt_double(c.scenario.channel.alpha_nlos); },
         [](E& c, SV v) { c.scenario.channel.alpha_nlos = parse_double(v); }},
        {"channel.beta_per_m", "1/m", [](const E& c) { return fmt_double(c.scenario.channel.beta); },
         [](E& c, SV v) { c.scenario.channel.beta = parse_double(v); }},
        {"channel.nakagami_m", "", [](const E& c) { return fmt_double(c.scenario.channel.nakagami_m); },
         [](E& c, SV v) { c.scenario.channel.nakagami_m = parse_double(v); }},
        {"channel.ref_dist_m", "m", [](const E& c) { return fmt_double(c.scenario.channel.ref_dist); },
         [](E& c, SV v) { c.scenario.channel.ref_dist = parse_double(v); }},
        {"channel.carrier_ghz", "GHz, metadata", [](const E& c) { return fmt_double(c.scenario.channel.carrier_hz / 1e9); },
         [](E& c, SV v) { c.scenario.channel.carrier_hz = parse_double(v) * 1e9; }},
        {"radio.bandwidth_hz", "Hz", [](const E& c) { return fmt_double(c.radio.bandwidth_w); },
         [](E& c, SV v) { c.radio.bandwidth_w = parse_double(v); }},
        {"radio.noise_dbm_per_hz", "dBm/Hz", [](const E& c) { return fmt_double(watts_to_dbm(c.radio.noise_density)); },
         [](E& c, SV v) { c.radio.noise_density = dbm_to_watts(parse_double(v)); }},
        {"radio.slot_s", "s", [](const E& c) { return fmt_double(c.radio.slot_t); },
         [](E& c, SV v) { c.radio.slot_t = parse_double(v); }},
        {"radio.pilot_s", "s", [](const E& c) { return fmt_double(c.radio.pilot_tp); },
         [](E& c, SV v) { c.radio.pilot_tp = parse_double(v); }},
        {"radio.sector_tx_deg", "deg", [](const E& c) { return fmt_double(rad_to_deg(c.radio.sector_tx)); },
         [](E& c, SV v) { c.radio.sector_tx = deg_to_rad(parse_double(v)); }},
        {"radio.sector_rx_deg", "deg", [](const E& c) { return fmt_double(rad_to_deg(c.radio.sector_rx)); },
         [](E& c, SV v) { c.radio.sector_rx = deg_to_rad(parse_double(v)); }},
        {"radio.side_lobe_z", "linear", [](const E& c) { return fmt_double(c.radio.side_lobe_z); },
         [](E& c, SV v) { c.radio.side_lobe_z = parse_double(v); }},
        {"radio.p_max_dbm", "dBm", [](const E& c) { return fmt_double(watts_to_dbm(c.radio.p_max)); },
         [](E& c, SV v) { c.radio.p_max = dbm_to_watts(parse_double(v)); }},
        {"grid.scheme", "reciprocal-square | uniform", [](const E& c) { return std::string(to_string(c.grid.scheme)); },
         [](E& c, SV v) { c.grid.scheme = parse_scheme(v); }},
        {"grid.n_power", "", [](const E& c) { return std::to_string(c.grid.n_power); },
         [](E& c, SV v) { c.grid.n_power = detail::parse_int<int>(v); }},
        {"grid.n_beamwidth", "", [](const E& c) { return std::to_string(c.grid.n_beamwidth); },
         [](E& c, SV v) { c.grid.n_beamwidth = detail::parse_int<int>(v); }},
        {"grid.p_min_dbm", "dBm", [](const E& c) { return fmt_double(watts_to_dbm(c.grid.p_min)); },
         [](E& c, SV v) { c.grid.p_min = dbm_to_watts(parse_double(v)); }},
        {"grid.p_max_dbm", "dBm", [](const E& c) { return fmt_double(watts_to_dbm(c.grid.p_max)); },
         [](E& c, SV v) { c.grid.p_max = dbm_to_watts(parse_double(v)); }},
        {"grid.phi_min_deg", "deg", [](const E& c) { return fmt_double(rad_to_deg(c.grid.phi_min)); },
         [](E& c, SV v) { c.grid.phi_min = deg_to_rad(parse_double(v)); }},
        {"grid.phi_max_deg", "deg", [](const E& c) { return fmt_double(rad_to_deg(c.grid.phi_max)); },
         [](E& c, SV v) { c.grid.phi_max = deg_to_rad(parse_double(v)); }},
        {"train.prefill_episodes", "", [](const E& c) { return std::to_string(c.train.prefill_episodes); },
         [](E& c, SV v) { c.train.prefill_episodes = detail::parse_int<int>(v); }},
        {"train.decay_episodes", "", [](const E& c) { return std::to_string(c.train.decay_episodes); },
         [](E& c, SV v) { c.train.decay_episodes = detail::parse_int<int>(v); }},
        {"train.final_episodes", "", [](const E& c) { return std::to_string(c.train.final_episodes); },
         [](E& c, SV v) { c.train.final_episodes = detail::parse_int<int>(v); }},
        {"train.epsilon_start", "", [](const E& c) { return fmt_double(c.train.epsilon_start); },
         [](E& c, SV v) { c.train.epsilon_start = parse_double(v); }},
        {"train.batch", "", [](const E& c) { return std::to_string(c.train.batch); },
         [](E& c, SV v) { c.train.batch = detail::parse_int<int>(v); }},
        {"train.lr", "", [](const E& c) { return fmt_double(c.train.lr); },
         [](E& c, SV v) { c.train.lr = parse_double(v); }},
        {"train.lr_final", "", [](const E& c) { return fmt_double(c.train.lr_final); },
         [](E& c, SV v) { c.train.lr_final = parse_double(v); }},
        {"train.buffer_capacity", "transitions", [](const E& c) { return std::to_string(c.train.buffer_capacity); },
         [](E& c, SV v) { c.train.buffer_capacity = detail::parse_int<std::size_t>(v); }},
        {"train.pad_db", "dB, auto = 1st percentile of training interference",
         [](const E& c) { return c.train.pad_db ? fmt_double(*c.train.pad_db) : std::string("auto"); },
         [](E& c, SV v) {
             if (v == "auto") c.train.pad_db.reset();
             else c.train.pad_db = parse_double(v);
         }},
        {"train.hidden", "comma-separated widths",
         [](const E& c) {
             std::string s;
             for (std::size_t k = 0; k < c.train.hidden.size(); ++k) s += (k ? "," : "") + std::to_string(c.train.hidden[k]);
             return s;
         },
         [](E& c, SV v) { c.train.hidden = detail::parse_int_list(v); }},
        {"train.target_scale", "0 = 1/(W*N)", [](const E& c) { return fmt_double(c.train.target_scale); },
         [](E& c, SV v) { c.train.target_scale = parse_double(v); }},
        {"eval.trials", "", [](const E& c) { return std::to_string(c.trials); },
         [](E& c, SV v) { c.trials = detail::parse_int<int>(v); }},
        {"eval.es_budget", "joint actions", [](const E& c) { return std::to_string(c.es_budget); },
         [](E& c, SV v) { c.es_budget = detail::parse_int<std::uint64_t>(v); }},
        {"eval.underestimate_resolution", "beamwidth points",
         [](const E& c) { return std::to_string(c.underestimate_resolution); },
         [](E& c, SV v) { c.underestimate_resolution = detail::parse_int<int>(v); }},
        {"eval.threads", "0 = all cores", [](const E& c) { return std::to_string(c.threads); },
         [](E& c, SV v) { c.threads = detail::parse_int<int>(v); }},
        {"output.dir", "", [](const E& c) { return c.output_dir; },
         [](E& c, SV v) { c.output_dir = std::string(v); }},
    };
    return keys;
}

inline const ConfigKey* find_key(std::string_view name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

inline void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    const ConfigKey* k = find_key(key);
    if (!k) throw std::invalid_argument("unknown key '" + std::string(key) + "'");
    k->set(cfg, value);
}

/// Parses `key = value` lines. `[section]` lines prefix the keys that
/// follow, so `[grid]` then `n_power = 4` sets grid.n_power. `#` starts a
/// comment. Errors name the source and line.
inline ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>",
                                     ExperimentConfig cfg = {}) {
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string_view sv = line;
        if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = detail::trim(sv);
        if (sv.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + msg);
        };
        if (sv.front() == '[') {
            if (sv.back() != ']') fail("unterminated section header");
            section = std::string(detail::trim(sv.substr(1, sv.size() - 2)));
            continue;
        }
        const auto eq = sv.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'");
        const auto key = detail::trim(sv.substr(0, eq));
        const auto value = detail::trim(sv.substr(eq + 1));
        if (key.empty()) fail("missing key");
        if (value.empty()) fail("missing value for '" + std::string(key) + "'");
        const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        try {
            set_config_value(cfg, full, value);
        } catch (const std::invalid_argument& e) {
            fail(std::string(e.what()));
        }
    }
    cfg.resolve();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(is, path);
}

namespace detail {

// Fewest significant digits that set the key back to the identical value.
inline std::string shortest_value(const ConfigKey& k, const ExperimentConfig& cfg) {
    const std::string full = k.get(cfg);
    if (full.find_first_of(".eE") == std::string::npos) return full;
    double v = 0;
    const auto [p, ec] = std::from_chars(full.data(), full.data() + full.size(), v);
    if (ec != std::errc{} || p != full.data() + full.size()) return full;
    for (int digits = 1; digits < 17; ++digits) {
        std::ostringstream os;
        os << std::setprecision(digits) << v;
        std::string text = os.str();
        if (text.find("e+") != std::string::npos && std::abs(v) < 1e15) {
            std::ostringstream fixed;
            fixed << std::fixed << std::setprecision(0) << std::stod(text);
            text = fixed.str();
        }
        ExperimentConfig probe = cfg;
        k.set(probe, text);
        if (k.get(probe) == full) return text;
    }
    return full;
}

} // namespace detail

/// Canonical dump of every key; parses back to the same configuration.
inline std::string config_to_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) {
        out += k.name + " = " + detail::shortest_value(k, cfg);
        if (!k.unit.empty()) out += "  # " + k.unit;
        out += '\n';
    }
    return out;
}

// FNV-1a over the canonical dump. output.dir and eval.threads do not
// change results, so they are left out.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& k : config_keys()) {
        if (k.name == "output.dir" || k.name == "eval.threads") continue;
        for (char c : k.name + "=" + k.get(cfg) + "\n") {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

inline std::string config_hash_hex(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << config_hash(cfg);
    return os.str();
}

} // namespace mmwbeam
