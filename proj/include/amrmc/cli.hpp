#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "amrmc/experiments.hpp"
#include "amrmc/io.hpp"
#include "amrmc/moments.hpp"
#include "amrmc/regression.hpp"

namespace amrmc {

/// Configuration rejection; carries every validation failure, not just the first.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> failures)
        : std::runtime_error(join(failures)), failures_(std::move(failures)) {}
    const std::vector<std::string>& failures() const { return failures_; }

private:
    static std::string join(const std::vector<std::string>& fs) {
        std::string s = "invalid configuration:";
        for (const auto& f : fs) {
            s += "\n  - ";
            s += f;
        }
        return s;
    }
    std::vector<std::string> failures_;
};

struct PriceConfig {
    ProcessKind process = ProcessKind::DriftAdjustedGeometricBrownian;
    ExerciseGrid grid;
    BasisSpec basis;
    PayoffSpec payoff;
    std::size_t n_paths = 0;
    bool single_batch = false;
    std::size_t probe_paths = 100000;  // check subcommand only
};

struct MomentsConfig {
    Setting setting = Setting::Normal;
    int k_max = 6;
    double rho = 2.0;
    double t1 = 1.0, t2 = 2.0;
    bool gram = false;  // emit the GramAnalysis JSON at (k_max, t1) instead of the CSV table
};

struct BoundsConfig {
    std::string kind = "single";  // "single" (worst-case normal) | "multi" (Theorem 3)
    Setting setting = Setting::Normal;
    int K = 0;
    double n_paths = 1;
    double rho = 2.0;
    int m = 2, n = 1;
    double c = 2.0, t_m = 2.0;
};

struct CriticalConfig {
    CurveSetting setting = CurveSetting::NormalSingle;
    CurveParams params;
    bool scalar = false;
    double n_scalar = 0;
    std::vector<double> n_values;
};

struct RunConfig {
    std::string subcommand;
    std::uint64_t base_seed = 0;
    int threads = 0;  // 0 = auto
    std::string output_path;

    PriceConfig price;     // price, check
    SweepGrid sweep;
    std::string sweep_format = "csv";  // csv | json | plot
    MomentsConfig moments;
    BoundsConfig bounds;
    CriticalConfig critical;

    std::string effective;  // config with defaults applied, echoed to diagnostics
};

namespace detail {

using json = nlohmann::json;

struct Reader {
    const json& doc;
    std::vector<std::string>& errors;

    bool require(const char* key) {
        if (!doc.contains(key)) {
            errors.push_back(std::string(key) + " required");
            return false;
        }
        return true;
    }
    double num(const char* key, double fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_number()) {
            errors.push_back(std::string(key) + ": expected a number");
            return fallback;
        }
        return doc[key].get<double>();
    }
    std::int64_t integer(const char* key, std::int64_t fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_number_integer()) {
            errors.push_back(std::string(key) + ": expected an integer");
            return fallback;
        }
        return doc[key].get<std::int64_t>();
    }
    std::uint64_t unsigned64(const char* key, std::uint64_t fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_number_unsigned() && !doc[key].is_number_integer()) {
            errors.push_back(std::string(key) + ": expected an unsigned integer");
            return fallback;
        }
        return doc[key].get<std::uint64_t>();
    }
    bool boolean(const char* key, bool fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_boolean()) {
            errors.push_back(std::string(key) + ": expected a boolean");
            return fallback;
        }
        return doc[key].get<bool>();
    }
    std::string str(const char* key, const std::string& fallback) {
        if (!doc.contains(key)) return fallback;
        if (!doc[key].is_string()) {
            errors.push_back(std::string(key) + ": expected a string");
            return fallback;
        }
        return doc[key].get<std::string>();
    }
    template <typename T>
    std::vector<T> numbers(const char* key) {
        std::vector<T> out;
        if (!doc.contains(key)) return out;
        if (!doc[key].is_array()) {
            errors.push_back(std::string(key) + ": expected an array");
            return out;
        }
        for (const auto& v : doc[key]) {
            if (!v.is_number()) {
                errors.push_back(std::string(key) + ": expected numeric entries");
                return {};
            }
            out.push_back(v.get<T>());
        }
        return out;
    }
};

inline void check_keys(const json& doc, const std::set<std::string>& allowed,
                       std::vector<std::string>& errors) {
    for (const auto& item : doc.items())
        if (allowed.find(item.key()) == allowed.end())
            errors.push_back("unknown key: " + item.key());
}

inline std::optional<Setting> parse_setting(const std::string& s,
                                            std::vector<std::string>& errors) {
    if (s == "normal") return Setting::Normal;
    if (s == "lognormal") return Setting::Lognormal;
    errors.push_back("setting: expected \"normal\" or \"lognormal\", got \"" + s + "\"");
    return std::nullopt;
}

inline void parse_process_block(Reader& r, PriceConfig& out) {
    const std::string process = r.str("process", "geometric");
    if (process == "brownian")
        out.process = ProcessKind::StandardBrownian;
    else if (process == "geometric")
        out.process = ProcessKind::DriftAdjustedGeometricBrownian;
    else
        r.errors.push_back("process: expected \"brownian\" or \"geometric\"");
    out.grid.times = r.numbers<double>("times");
    if (out.grid.times.empty()) r.errors.push_back("times: non-empty array required");
    out.grid.t0_state =
        r.num("t0_state", out.process == ProcessKind::StandardBrownian ? 0.0 : 1.0);

    const std::string family = r.str("basis_family", "hermite");
    if (family == "hermite")
        out.basis.family = BasisFamily::HermiteNormalized;
    else if (family == "expmart")
        out.basis.family = BasisFamily::ExponentialMartingale;
    else
        r.errors.push_back("basis_family: expected \"hermite\" or \"expmart\"");
    out.basis.order = static_cast<int>(r.integer("basis_order", 3));

    const std::string payoff = r.str("payoff", "put");
    if (payoff == "call")
        out.payoff.kind = PayoffKind::Call;
    else if (payoff == "put")
        out.payoff.kind = PayoffKind::Put;
    else if (payoff == "identity")
        out.payoff.kind = PayoffKind::Identity;
    else if (payoff == "combo")
        out.payoff.kind = PayoffKind::LinearBasisCombination;
    else
        r.errors.push_back("payoff: expected call, put, identity or combo");
    out.payoff.strike = r.num("strike", 1.0);
    if (r.doc.contains("combo")) {
        if (!r.doc["combo"].is_array()) {
            r.errors.push_back("combo: expected an array of per-date coefficient arrays");
        } else {
            for (const auto& row : r.doc["combo"]) {
                std::vector<double> coeffs;
                if (!row.is_array()) {
                    r.errors.push_back("combo: expected an array of arrays");
                    break;
                }
                for (const auto& v : row) coeffs.push_back(v.get<double>());
                out.payoff.combo.push_back(std::move(coeffs));
            }
        }
    }
    if (r.doc.contains("applicable")) {
        for (const auto& v : r.doc["applicable"])
            out.payoff.applicable.push_back(v.get<bool>() ? 1 : 0);
    }
}

}  // namespace detail

/// Parses and validates a JSON configuration document. Strict: unknown keys
/// are rejected by name, base_seed is mandatory, and every failure in the
/// document is reported, not just the first.
inline RunConfig parse_config(const std::string& text) {
    using detail::json;
    std::vector<std::string> errors;
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError({"malformed JSON"});
    if (!doc.is_object()) throw ConfigError({"top-level JSON object required"});

    detail::Reader r{doc, errors};
    RunConfig cfg;
    cfg.subcommand = r.str("subcommand", "");
    static const std::set<std::string> kSubcommands = {"price",  "sweep",    "moments",
                                                       "bounds", "critical", "check"};
    if (cfg.subcommand.empty()) {
        errors.push_back("subcommand required (price, sweep, moments, bounds, critical, check)");
    } else if (kSubcommands.find(cfg.subcommand) == kSubcommands.end()) {
        errors.push_back("unknown subcommand: " + cfg.subcommand);
    }
    if (r.require("base_seed")) cfg.base_seed = r.unsigned64("base_seed", 0);
    cfg.threads = static_cast<int>(r.integer("threads", 0));
    cfg.output_path = r.str("out", "");

    std::set<std::string> allowed = {"subcommand", "base_seed", "threads", "out"};
    json effective = doc;
    effective["threads"] = cfg.threads;

    if (cfg.subcommand == "price" || cfg.subcommand == "check") {
        allowed.insert({"process", "times", "t0_state", "basis_family", "basis_order",
                        "payoff", "strike", "combo", "applicable"});
        if (cfg.subcommand == "price") allowed.insert({"n_paths", "single_batch"});
        if (cfg.subcommand == "check") allowed.insert({"probe_paths"});
        detail::parse_process_block(r, cfg.price);
        cfg.price.n_paths = static_cast<std::size_t>(r.integer("n_paths", 100000));
        cfg.price.single_batch = r.boolean("single_batch", false);
        cfg.price.probe_paths = static_cast<std::size_t>(r.integer("probe_paths", 100000));
        effective["t0_state"] = cfg.price.grid.t0_state;
        if (cfg.subcommand == "price") {
            effective["n_paths"] = cfg.price.n_paths;
            effective["single_batch"] = cfg.price.single_batch;
        } else {
            effective["probe_paths"] = cfg.price.probe_paths;
        }
    } else if (cfg.subcommand == "sweep") {
        allowed.insert({"setting", "K_values", "N_values", "batches", "t1", "t2",
                        "scaled_threshold", "N_ref", "format"});
        cfg.sweep_format = r.str("format", "csv");
        if (cfg.sweep_format != "csv" && cfg.sweep_format != "json" &&
            cfg.sweep_format != "plot")
            errors.push_back("format: expected \"csv\", \"json\" or \"plot\"");
        if (auto s = detail::parse_setting(r.str("setting", "normal"), errors))
            cfg.sweep.setting = *s;
        cfg.sweep.k_values = r.numbers<int>("K_values");
        cfg.sweep.n_values = r.numbers<std::size_t>("N_values");
        if (cfg.sweep.k_values.empty()) errors.push_back("K_values: non-empty array required");
        if (cfg.sweep.n_values.empty()) errors.push_back("N_values: non-empty array required");
        cfg.sweep.batches = static_cast<std::size_t>(r.integer("batches", 5000));
        cfg.sweep.t1 = r.num("t1", 1.0);
        cfg.sweep.t2 = r.num("t2", 2.0);
        cfg.sweep.scaled_threshold = static_cast<int>(r.integer("scaled_threshold", 7));
        cfg.sweep.n_ref = static_cast<std::size_t>(r.integer("N_ref", 500000));
        cfg.sweep.base_seed = cfg.base_seed;
        cfg.sweep.threads = cfg.threads;
        effective["batches"] = cfg.sweep.batches;
        effective["t1"] = cfg.sweep.t1;
        effective["t2"] = cfg.sweep.t2;
        effective["scaled_threshold"] = cfg.sweep.scaled_threshold;
        effective["N_ref"] = cfg.sweep.n_ref;
    } else if (cfg.subcommand == "moments") {
        allowed.insert({"setting", "k_max", "rho", "t1", "t2", "gram"});
        if (auto s = detail::parse_setting(r.str("setting", "normal"), errors))
            cfg.moments.setting = *s;
        cfg.moments.k_max = static_cast<int>(r.integer("k_max", 6));
        cfg.moments.rho = r.num("rho", 2.0);
        cfg.moments.t1 = r.num("t1", 1.0);
        cfg.moments.t2 = r.num("t2", 2.0);
        cfg.moments.gram = r.boolean("gram", false);
        effective["k_max"] = cfg.moments.k_max;
    } else if (cfg.subcommand == "bounds") {
        allowed.insert({"kind", "setting", "K", "N", "rho", "m", "n", "c", "t_m"});
        cfg.bounds.kind = r.str("kind", "single");
        if (cfg.bounds.kind != "single" && cfg.bounds.kind != "multi")
            errors.push_back("kind: expected \"single\" or \"multi\"");
        if (auto s = detail::parse_setting(r.str("setting", "normal"), errors))
            cfg.bounds.setting = *s;
        cfg.bounds.K = static_cast<int>(r.integer("K", 0));
        cfg.bounds.n_paths = r.num("N", 1);
        cfg.bounds.rho = r.num("rho", 2.0);
        cfg.bounds.m = static_cast<int>(r.integer("m", 2));
        cfg.bounds.n = static_cast<int>(r.integer("n", 1));
        cfg.bounds.c = r.num("c", 2.0);
        cfg.bounds.t_m = r.num("t_m", 2.0);
    } else if (cfg.subcommand == "critical") {
        allowed.insert({"setting", "N", "N_values", "rho", "t1", "t2", "m", "n", "c", "t_m",
                        "t_m_minus_1"});
        const std::string s = r.str("setting", "normal-single");
        if (s == "normal-single")
            cfg.critical.setting = CurveSetting::NormalSingle;
        else if (s == "lognormal-single")
            cfg.critical.setting = CurveSetting::LognormalSingle;
        else if (s == "normal-multi")
            cfg.critical.setting = CurveSetting::NormalMulti;
        else if (s == "lognormal-multi")
            cfg.critical.setting = CurveSetting::LognormalMulti;
        else
            errors.push_back("setting: expected normal-single, lognormal-single, normal-multi "
                             "or lognormal-multi");
        cfg.critical.params.rho = r.num("rho", 2.0);
        cfg.critical.params.t1 = r.num("t1", 1.0);
        cfg.critical.params.t2 = r.num("t2", 2.0);
        cfg.critical.params.m = static_cast<int>(r.integer("m", 2));
        cfg.critical.params.n = static_cast<int>(r.integer("n", 1));
        cfg.critical.params.c = r.num("c", 2.0);
        cfg.critical.params.t_m = r.num("t_m", 2.0);
        cfg.critical.params.t_m_minus_1 = r.num("t_m_minus_1", 1.0);
        const bool has_scalar = doc.contains("N");
        const bool has_list = doc.contains("N_values");
        if (has_scalar == has_list) {
            errors.push_back("critical: exactly one of N or N_values required");
        } else if (has_scalar) {
            cfg.critical.scalar = true;
            cfg.critical.n_scalar = r.num("N", 0);
        } else {
            cfg.critical.n_values = r.numbers<double>("N_values");
            if (cfg.critical.n_values.empty())
                errors.push_back("N_values: non-empty array required");
        }
    }

    if (!cfg.subcommand.empty() && kSubcommands.find(cfg.subcommand) != kSubcommands.end())
        detail::check_keys(doc, allowed, errors);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    cfg.effective = effective.dump(2);
    return cfg;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace detail {

inline std::string run_critical(const CriticalConfig& c) {
    char buf[80];
    if (c.scalar) {
        const CriticalCurve curve = critical_curve(c.setting, c.params, c.n_scalar);
        if (std::abs(curve.k_upper - curve.k_lower) < 5e-4)
            std::snprintf(buf, sizeof buf, "%.3f\n", curve.k_lower);
        else
            std::snprintf(buf, sizeof buf, "%.3f %.3f\n", curve.k_lower, curve.k_upper);
        return buf;
    }
    std::string out = "N,K_lower,K_upper\n";
    for (double n : c.n_values) {
        const CriticalCurve curve = critical_curve(c.setting, c.params, n);
        std::snprintf(buf, sizeof buf, "%.17g,%.3f,%.3f\n", n, curve.k_lower, curve.k_upper);
        out += buf;
    }
    return out;
}

inline std::string run_moments(const MomentsConfig& c) {
    if (c.gram) {
        const BasisFamily family = c.setting == Setting::Normal
                                       ? BasisFamily::HermiteNormalized
                                       : BasisFamily::ExponentialMartingale;
        const GramAnalysis g = gram_analysis({family, c.k_max}, c.t1);
        return to_json(g).dump(2) + "\n";
    }
    if (c.k_max < 0) throw std::invalid_argument("moments: k_max must be >= 0");
    std::string out = "setting,k1,k2,rho,t1,t2,first,fourth\n";
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k1 = 0; k1 <= c.k_max; ++k1)
        for (int k2 = 0; k2 <= c.k_max; ++k2) {
            double first, fourth, rho = nan, t1 = nan, t2 = nan;
            if (c.setting == Setting::Normal) {
                rho = c.rho;
                first = first_cross_moment_normal(k1, k2, c.rho);
                fourth = fourth_cross_moment_normal(k1, k2, c.rho);
            } else {
                t1 = c.t1;
                t2 = c.t2;
                const LognormalMoments m = lognormal_moments(k1, k2, c.t1, c.t2);
                first = m.first;
                fourth = m.fourth;
            }
            out += to_string(c.setting) + ',' + std::to_string(k1) + ',' + std::to_string(k2) +
                   ',' + csv_double(rho) + ',' + csv_double(t1) + ',' + csv_double(t2) + ',' +
                   csv_double(first) + ',' + csv_double(fourth) + '\n';
        }
    return out;
}

inline std::string run_bounds(const BoundsConfig& c) {
    const BoundReport report =
        c.kind == "single"
            ? worst_case_bounds_normal(c.K, c.n_paths, c.rho)
            : theorem3_bound(c.setting, c.m, c.n, c.K, c.n_paths, c.c, c.t_m);
    return to_json(report).dump(2) + "\n";
}

inline void write_output(const std::string& path, const std::string& data) {
    if (path.empty()) {
        std::cout << data;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output path: " + path);
    out << data;
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

/// Computes the data output for a validated config. Diagnostics go to the
/// error stream only; the returned string is the entire data output.
inline std::string run_subcommand(const RunConfig& cfg) {
    if (cfg.subcommand == "critical") return detail::run_critical(cfg.critical);
    if (cfg.subcommand == "moments") return detail::run_moments(cfg.moments);
    if (cfg.subcommand == "bounds") return detail::run_bounds(cfg.bounds);
    if (cfg.subcommand == "sweep") {
        SweepGrid grid = cfg.sweep;
        grid.base_seed = cfg.base_seed;
        grid.threads = cfg.threads;
        const SweepResult result = run_sweep(grid);
        if (cfg.sweep_format == "json") return to_json(result).dump(2) + "\n";
        if (cfg.sweep_format == "plot") return sweep_to_plot_csv(result);
        return sweep_to_csv(result);
    }
    if (cfg.subcommand == "price") {
        const PriceConfig& p = cfg.price;
        const CoefficientSet result =
            price_bermudan(p.process, p.grid, p.payoff, p.basis, p.n_paths,
                           SeedCoordinates{cfg.base_seed, {}},
                           {p.single_batch, cfg.threads});
        return to_json(result).dump(2) + "\n";
    }
    if (cfg.subcommand == "check") {
        const PriceConfig& p = cfg.price;
        const AssumptionReport report =
            check_assumptions(p.process, p.grid, p.payoff, p.basis, p.probe_paths,
                              SeedCoordinates{cfg.base_seed, {}}, cfg.threads);
        return to_json(report).dump(2) + "\n";
    }
    throw std::invalid_argument("unknown subcommand: " + cfg.subcommand);
}

/// Runs the subcommand and writes its output. Exit codes: 0 success,
/// 1 validation failure, 2 numerical (Gram conditioning) failure, 3 I/O
/// failure. Diagnostics go to stderr, never into the data stream.
inline int dispatch(const RunConfig& cfg) {
    try {
        const std::string data = run_subcommand(cfg);
        detail::write_output(cfg.output_path, data);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const GramConditioningError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace amrmc
