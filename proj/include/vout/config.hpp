#pragma once

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace vout {

/// Flat `key = value` text. Blank lines and `#` comments are ignored.
using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (seps.find(c) != std::string::npos) {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
        if (kv.count(key)) throw ConfigError(key, "duplicate key");
        kv[key] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path + "'");
    return parse_key_values(in);
}

inline double parse_number(const std::string& field, const std::string& text) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE)
        throw ConfigError(field, "not a number: '" + text + "'");
    return v;
}

inline long long parse_integer(const std::string& field, const std::string& text) {
    const double v = parse_number(field, text);
    if (v != std::floor(v)) throw ConfigError(field, "not an integer: '" + text + "'");
    return static_cast<long long>(v);
}

inline std::vector<double> parse_number_list(const std::string& field, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : detail::split(text, ",;")) out.push_back(parse_number(field, item));
    return out;
}

/// Settings beyond the scenario used by the `sweep` and `noise` verbs.
struct StudySettings {
    std::vector<double> epsilons{4e-3, 2e-3, 1e-3};
    std::vector<int> n_values{5, 10, 20};
    double noise_duration = 50.0;
};

struct Config {
    Scenario scenario;
    StudySettings study;
};

/// Builds a validated configuration; unknown keys and malformed values raise
/// ConfigError naming the field.
inline Config config_from_key_values(const KeyValues& kv) {
    Config cfg;
    Scenario& sc = cfg.scenario;
    NoiseSpec noise;
    bool has_noise = false;
    for (const auto& [key, val] : kv) {
        if (key == "epsilon") sc.epsilon = parse_number(key, val);
        else if (key == "signal.shape") {
            try {
                sc.signal.shape = parse_shape(val);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, e.what());
            }
            sc.signal.phase_shift = sc.signal.shape == Shape::square ? 0.25 : 0.0;
        } else if (key == "signal.amplitude") sc.signal.amplitude = parse_number(key, val);
        else if (key == "n_periods") sc.n_periods = static_cast<int>(parse_integer(key, val));
        else if (key == "h_step") sc.h_step = parse_number(key, val);
        else if (key == "t_end") sc.t_end = parse_number(key, val);
        else if (key == "disturbance") {
            sc.disturbance.clear();
            for (const auto& item : detail::split(val, ";,")) {
                const auto parts = detail::split(item, ":");
                if (parts.size() != 2) throw ConfigError(key, "expected 'time:value' pairs");
                sc.disturbance.push_back({parse_number(key, parts[0]), parse_number(key, parts[1])});
            }
        } else if (key == "reference.initial") sc.reference.initial = parse_number(key, val);
        else if (key == "reference.start_time") sc.reference.start_time = parse_number(key, val);
        else if (key == "reference.slope") sc.reference.slope = parse_number(key, val);
        else if (key == "reference.filter_bandwidth_hz") sc.reference.filter_bandwidth_hz = parse_number(key, val);
        else if (key == "noise.sample_time") noise.sample_time = parse_number(key, val), has_noise = true;
        else if (key == "noise.power") noise.power = parse_number(key, val), has_noise = true;
        else if (key == "noise.seed") {
            const auto seed = parse_integer(key, val);
            if (seed < 0) throw ConfigError(key, "must be >= 0");
            noise.seed = static_cast<std::uint64_t>(seed);
        } else if (key == "feedback_source") {
            try {
                sc.feedback = parse_feedback(val);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, e.what());
            }
        } else if (key == "output.stride") {
            const auto s = parse_integer(key, val);
            if (s < 1) throw ConfigError(key, "must be >= 1");
            sc.stride = static_cast<std::size_t>(s);
        } else if (key == "sweep.epsilons") cfg.study.epsilons = parse_number_list(key, val);
        else if (key == "sweep.n_values") {
            cfg.study.n_values.clear();
            for (double v : parse_number_list(key, val)) {
                if (v < 1 || v != std::floor(v)) throw ConfigError(key, "entries must be positive integers");
                cfg.study.n_values.push_back(static_cast<int>(v));
            }
        } else if (key == "noise.duration") cfg.study.noise_duration = parse_number(key, val);
        else throw ConfigError(key, "unknown key");
    }
    if (has_noise) sc.noise = noise;
    sc.validate();
    return cfg;
}

inline Config load_config(const std::string& path) { return config_from_key_values(read_key_values(path)); }

}  // namespace vout
