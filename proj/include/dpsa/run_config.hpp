#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpsa/block_analytics.hpp"
#include "dpsa/frontier.hpp"
#include "dpsa/pulse_train_sim.hpp"
#include "dpsa/verify.hpp"

namespace dpsa {

inline constexpr const char* kToolVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One JSON document drives every subcommand, discriminated by "command"
// (which the CLI verb may override). Unknown keys are rejected so typos
// cannot silently change a run.
struct RunConfig {
    std::string command;
    std::uint64_t seed = 1;
    int workers = 0;  // 0 = not set
    std::string out_path;
    std::optional<std::string> timestamp_override;

    SourceParams source;
    Strategy strategy;
    BlockPolicy policy;
    long long n_blocks = 0;
    SweepConfig sweep;
    VerifyOptions verify;
    std::string frontier_csv;
    std::vector<ExperimentPoint> points;

    nlohmann::json echo;  // resolved document, embedded in result records
};

namespace cfg_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(where + " is missing required key '" + key + "'");
    return *it;
}

inline double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + " must be a number");
    return v.get<double>();
}

inline int as_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
    return v.get<int>();
}

inline std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + " must be a string");
    return v.get<std::string>();
}

inline StrategyKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "usd") return StrategyKind::Usd;
    if (s == "med") return StrategyKind::Med;
    if (s == "bob_device") return StrategyKind::BobDevice;
    throw ConfigError(where + ": unknown strategy kind '" + s +
                      "' (expected usd | med | bob_device)");
}

inline SourceParams parse_source(const json& v) {
    check_keys(v, "source", {"mu_alpha"});
    SourceParams src;
    src.mu_alpha = as_number(require(v, "mu_alpha", "source"), "source.mu_alpha");
    return src;
}

inline Strategy parse_strategy(const json& v) {
    check_keys(v, "strategy", {"kind", "lambda"});
    const StrategyKind kind =
        parse_kind(as_string(require(v, "kind", "strategy"), "strategy.kind"), "strategy");
    if (kind == StrategyKind::Med) {
        return Strategy::med(
            as_number(require(v, "lambda", "strategy (med)"), "strategy.lambda"));
    }
    if (v.contains("lambda"))
        throw ConfigError("strategy.lambda is only valid for kind 'med'");
    return kind == StrategyKind::Usd ? Strategy::usd() : Strategy::bob_device();
}

inline BlockPolicy parse_policy(const json& v) {
    check_keys(v, "policy", {"M", "M_min", "q", "mu_beta"});
    BlockPolicy pol;
    pol.block_len = as_int(require(v, "M", "policy"), "policy.M");
    pol.min_run = as_int(require(v, "M_min", "policy"), "policy.M_min");
    pol.send_prob = as_number(require(v, "q", "policy"), "policy.q");
    pol.mu_beta = as_number(require(v, "mu_beta", "policy"), "policy.mu_beta");
    return pol;
}

inline std::vector<double> parse_number_array(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + " must be a non-empty array");
    std::vector<double> out;
    for (const auto& x : v) out.push_back(as_number(x, where + " element"));
    return out;
}

inline SweepConfig parse_sweep(const json& v, const SourceParams& src) {
    check_keys(v, "sweep",
               {"strategy", "M_range", "q_grid", "mu_beta_grid", "gain_bands", "dc_cap"});
    SweepConfig sw;
    sw.source = src;

    const json& st = require(v, "strategy", "sweep");
    check_keys(st, "sweep.strategy", {"kind", "lambdas"});
    sw.family = parse_kind(as_string(require(st, "kind", "sweep.strategy"),
                                     "sweep.strategy.kind"),
                           "sweep.strategy");
    if (st.contains("lambdas")) {
        if (sw.family != StrategyKind::Med)
            throw ConfigError("sweep.strategy.lambdas is only valid for kind 'med'");
        sw.lambdas = parse_number_array(st["lambdas"], "sweep.strategy.lambdas");
    }

    if (v.contains("M_range")) {
        const json& r = v["M_range"];
        if (!r.is_array() || r.size() != 2)
            throw ConfigError("sweep.M_range must be [lo, hi]");
        sw.m_lo = as_int(r[0], "sweep.M_range[0]");
        sw.m_hi = as_int(r[1], "sweep.M_range[1]");
    }
    if (v.contains("q_grid")) sw.q_grid = parse_number_array(v["q_grid"], "sweep.q_grid");
    if (v.contains("mu_beta_grid")) {
        const json& g = v["mu_beta_grid"];
        check_keys(g, "sweep.mu_beta_grid", {"min", "max", "points"});
        if (g.contains("min")) sw.mu_beta.lo = as_number(g["min"], "mu_beta_grid.min");
        if (g.contains("max")) sw.mu_beta.hi = as_number(g["max"], "mu_beta_grid.max");
        if (g.contains("points")) sw.mu_beta.points = as_int(g["points"], "mu_beta_grid.points");
    }
    if (v.contains("gain_bands")) {
        const json& g = v["gain_bands"];
        check_keys(g, "sweep.gain_bands", {"min", "max", "per_decade"});
        if (g.contains("min")) sw.gain_bands.lo = as_number(g["min"], "gain_bands.min");
        if (g.contains("max")) sw.gain_bands.hi = as_number(g["max"], "gain_bands.max");
        if (g.contains("per_decade"))
            sw.gain_bands.per_decade = as_int(g["per_decade"], "gain_bands.per_decade");
    }
    if (v.contains("dc_cap")) {
        const json& c = v["dc_cap"];
        if (c.is_null() || (c.is_string() && c.get<std::string>() == "none"))
            sw.dc_cap = std::nullopt;
        else
            sw.dc_cap = as_number(c, "sweep.dc_cap");
    }
    return sw;
}

inline VerifyOptions parse_verify(const json& v) {
    check_keys(v, "verify",
               {"mu_alphas", "M_range", "q_grid", "mu_betas", "strategies", "rel_tol",
                "mc_blocks", "mc_sigmas"});
    VerifyOptions opt;
    if (v.contains("mu_alphas"))
        opt.mu_alphas = parse_number_array(v["mu_alphas"], "verify.mu_alphas");
    if (v.contains("M_range")) {
        const json& r = v["M_range"];
        if (!r.is_array() || r.size() != 2)
            throw ConfigError("verify.M_range must be [lo, hi]");
        opt.m_lo = as_int(r[0], "verify.M_range[0]");
        opt.m_hi = as_int(r[1], "verify.M_range[1]");
    }
    if (v.contains("q_grid")) opt.q_grid = parse_number_array(v["q_grid"], "verify.q_grid");
    if (v.contains("mu_betas"))
        opt.mu_betas = parse_number_array(v["mu_betas"], "verify.mu_betas");
    if (v.contains("strategies")) {
        const json& s = v["strategies"];
        if (!s.is_array() || s.empty())
            throw ConfigError("verify.strategies must be a non-empty array");
        opt.families.clear();
        for (const auto& x : s)
            opt.families.push_back(
                parse_kind(as_string(x, "verify.strategies element"), "verify.strategies"));
    }
    if (v.contains("rel_tol")) opt.rel_tol = as_number(v["rel_tol"], "verify.rel_tol");
    if (v.contains("mc_blocks")) {
        if (!v["mc_blocks"].is_number_integer())
            throw ConfigError("verify.mc_blocks must be an integer");
        opt.mc_blocks = v["mc_blocks"].get<long long>();
    }
    if (v.contains("mc_sigmas")) opt.mc_sigmas = as_number(v["mc_sigmas"], "verify.mc_sigmas");
    return opt;
}

inline std::vector<ExperimentPoint> parse_points(const json& v) {
    if (!v.is_array() || v.empty())
        throw ConfigError("assess.points must be a non-empty array");
    std::vector<ExperimentPoint> pts;
    int idx = 0;
    for (const auto& e : v) {
        const std::string where = "assess.points[" + std::to_string(idx) + "]";
        check_keys(e, where, {"label", "gain", "qber", "mu_alpha", "dc_cap"});
        ExperimentPoint p;
        p.label = e.contains("label") ? as_string(e["label"], where + ".label")
                                      : "point" + std::to_string(idx);
        p.gain = as_number(require(e, "gain", where), where + ".gain");
        p.qber = as_number(require(e, "qber", where), where + ".qber");
        if (e.contains("mu_alpha")) p.mu_alpha = as_number(e["mu_alpha"], where + ".mu_alpha");
        if (e.contains("dc_cap")) p.dc_cap = as_number(e["dc_cap"], where + ".dc_cap");
        pts.push_back(p);
        ++idx;
    }
    return pts;
}

}  // namespace cfg_detail

// Parses and validates the whole document. cli_command, when non-empty,
// overrides the document's "command".
inline RunConfig parse_config(const nlohmann::json& doc, const std::string& cli_command = {}) {
    using cfg_detail::check_keys;
    using cfg_detail::require;

    static const std::set<std::string> kCommon = {"command", "seed",      "workers",
                                                  "out",     "timestamp", "source",
                                                  "strategy", "policy",   "n_blocks",
                                                  "sweep",   "verify",    "assess"};
    check_keys(doc, "config", kCommon);

    RunConfig cfg;
    cfg.command = cli_command;
    if (cfg.command.empty()) {
        if (!doc.contains("command"))
            throw ConfigError("no command: set \"command\" in the config or use a CLI verb");
        cfg.command = cfg_detail::as_string(doc["command"], "command");
    }
    static const std::set<std::string> kCommands = {"evaluate", "frontier", "simulate",
                                                    "verify", "assess"};
    if (!kCommands.count(cfg.command))
        throw ConfigError("unknown command '" + cfg.command + "'");

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
            throw ConfigError("seed must be a non-negative integer");
        cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("workers")) {
        cfg.workers = cfg_detail::as_int(doc["workers"], "workers");
        if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    }
    if (doc.contains("out")) cfg.out_path = cfg_detail::as_string(doc["out"], "out");
    if (doc.contains("timestamp"))
        cfg.timestamp_override = cfg_detail::as_string(doc["timestamp"], "timestamp");

    // sections permitted per command
    static const std::set<std::string> kAlways = {"command", "seed", "workers", "out",
                                                  "timestamp"};
    auto reject_extras = [&](const std::set<std::string>& allowed) {
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            if (kAlways.count(it.key()) || allowed.count(it.key())) continue;
            throw ConfigError("key '" + it.key() + "' is not allowed for command '" +
                              cfg.command + "'");
        }
    };

    if (cfg.command == "evaluate" || cfg.command == "simulate") {
        reject_extras(cfg.command == "simulate"
                          ? std::set<std::string>{"source", "strategy", "policy", "n_blocks"}
                          : std::set<std::string>{"source", "strategy", "policy"});
        cfg.source = cfg_detail::parse_source(require(doc, "source", "config"));
        cfg.strategy = cfg_detail::parse_strategy(require(doc, "strategy", "config"));
        cfg.policy = cfg_detail::parse_policy(require(doc, "policy", "config"));
        if (cfg.command == "simulate") {
            const auto& nb = require(doc, "n_blocks", "config");
            if (!nb.is_number_integer()) throw ConfigError("n_blocks must be an integer");
            cfg.n_blocks = nb.get<long long>();
            if (cfg.n_blocks < 1) throw ConfigError("n_blocks must be >= 1");
        }
    } else if (cfg.command == "frontier") {
        reject_extras({"source", "sweep"});
        cfg.source = cfg_detail::parse_source(require(doc, "source", "config"));
        cfg.sweep = cfg_detail::parse_sweep(require(doc, "sweep", "config"), cfg.source);
    } else if (cfg.command == "verify") {
        reject_extras({"verify"});
        if (doc.contains("verify")) cfg.verify = cfg_detail::parse_verify(doc["verify"]);
    } else if (cfg.command == "assess") {
        reject_extras({"assess"});
        const nlohmann::json& a = require(doc, "assess", "config");
        check_keys(a, "assess", {"frontier_csv", "points"});
        cfg.frontier_csv =
            cfg_detail::as_string(require(a, "frontier_csv", "assess"), "assess.frontier_csv");
        cfg.points = cfg_detail::parse_points(require(a, "points", "assess"));
    }

    cfg.echo = doc;
    cfg.echo["command"] = cfg.command;
    return cfg;
}

// ---- result records ----

inline std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::json metrics_to_json(const AttackMetrics& m) {
    nlohmann::json j;
    j["gain"] = m.gain;
    if (m.qber) j["qber"] = *m.qber;
    else j["qber"] = "undefined";
    j["dc"] = m.dc;
    return j;
}

inline nlohmann::json estimate_to_json(const McEstimate& e) {
    return {{"mean", e.mean},
            {"std_error", e.std_error},
            {"n_blocks", e.n_blocks},
            {"seed", e.seed}};
}

// Common envelope for every JSON output: tool id, version, timestamp, seed,
// and the resolved input config.
inline nlohmann::json make_record(const RunConfig& cfg) {
    nlohmann::json rec;
    rec["tool"] = "dpsa";
    rec["tool_version"] = kToolVersion;
    rec["timestamp"] =
        cfg.timestamp_override ? *cfg.timestamp_override : iso8601_utc_now();
    rec["seed"] = cfg.seed;
    rec["config"] = cfg.echo;
    return rec;
}

}  // namespace dpsa
