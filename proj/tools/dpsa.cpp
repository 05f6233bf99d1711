// dpsa: sequential-attack analysis for differential-phase-shift QKD.
// Subcommands: evaluate | frontier | simulate | verify | assess.
// One JSON config drives a run; --seed/--workers/--out override it.
// Exit codes: 0 success, 1 verification failure, 2 config/input error,
// 3 empty result.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpsa/csv.hpp"
#include "dpsa/run_config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitEmptyResult = 3;

struct Overrides {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

dpsa::RunConfig load_config(const Overrides& ov, const std::string& verb) {
    std::ifstream in(ov.config_path);
    if (!in) throw dpsa::ConfigError("cannot open config file '" + ov.config_path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw dpsa::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    dpsa::RunConfig cfg = dpsa::parse_config(doc, verb);
    if (ov.seed_set) {
        cfg.seed = ov.seed;
        cfg.echo["seed"] = ov.seed;
    }
    // --out and --workers are execution details: applied but never echoed,
    // so records stay byte-identical across destinations and worker counts
    if (!ov.out_path.empty()) cfg.out_path = ov.out_path;
    if (ov.workers > 0) cfg.workers = ov.workers;
    if (cfg.workers == 0) {
        // worker count never changes results, only wall time
        if (const char* env = std::getenv("DPSA_WORKERS")) {
            const int w = std::atoi(env);
            if (w >= 1) cfg.workers = w;
        }
        if (cfg.workers == 0) cfg.workers = 2;
    }
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dpsa::ConfigError("cannot write output file '" + path + "'");
    out << text;
}

void emit_record(const dpsa::RunConfig& cfg, const nlohmann::json& rec) {
    const std::string text = rec.dump(2) + "\n";
    if (cfg.out_path.empty())
        std::cout << text;
    else {
        write_text(cfg.out_path, text);
        std::cout << "wrote " << cfg.out_path << "\n";
    }
}

int cmd_evaluate(const dpsa::RunConfig& cfg) {
    const dpsa::AttackMetrics m = dpsa::metrics(cfg.source, cfg.strategy, cfg.policy);
    nlohmann::json rec = dpsa::make_record(cfg);
    rec["metrics"] = dpsa::metrics_to_json(m);
    emit_record(cfg, rec);
    return kExitOk;
}

int cmd_simulate(const dpsa::RunConfig& cfg) {
    const dpsa::ChainEstimates est = dpsa::simulate_chain(
        cfg.source, cfg.strategy, cfg.policy, cfg.n_blocks, cfg.seed, cfg.workers);
    nlohmann::json rec = dpsa::make_record(cfg);
    rec["estimates"]["gain"] = dpsa::estimate_to_json(est.gain);
    rec["estimates"]["dc"] = dpsa::estimate_to_json(est.dc);
    if (est.qber) rec["estimates"]["qber"] = dpsa::estimate_to_json(*est.qber);
    else rec["estimates"]["qber"] = "undefined";
    emit_record(cfg, rec);
    return kExitOk;
}

int cmd_frontier(const dpsa::RunConfig& cfg) {
    const dpsa::FrontierResult fr = dpsa::build_frontier(cfg.sweep, cfg.workers);
    if (fr.points.empty()) {
        std::cerr << "empty frontier: " << fr.cells << " cells examined, "
                  << fr.infeasible_cells
                  << " had no feasible mu_beta under the double-click cap\n";
        return kExitEmptyResult;
    }
    const std::string csv = dpsa::frontier_to_csv(fr.points);

    nlohmann::json rec = dpsa::make_record(cfg);
    rec["frontier"] = {{"points", static_cast<long long>(fr.points.size())},
                       {"cells", fr.cells},
                       {"infeasible_cells", fr.infeasible_cells},
                       {"candidates", fr.candidates},
                       {"min_gain", fr.points.front().gain},
                       {"max_gain", fr.points.back().gain}};

    if (cfg.out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(cfg.out_path, csv);
        // record travels next to the CSV
        std::string rec_path = cfg.out_path;
        const size_t dot = rec_path.rfind('.');
        if (dot != std::string::npos && rec_path.substr(dot) == ".csv")
            rec_path = rec_path.substr(0, dot);
        rec_path += ".meta.json";
        write_text(rec_path, rec.dump(2) + "\n");
        std::cout << "wrote " << cfg.out_path << " (" << fr.points.size()
                  << " points) and " << rec_path << "\n";
    }
    return kExitOk;
}

int cmd_verify(const dpsa::RunConfig& cfg) {
    const dpsa::VerifyReport rep = dpsa::run_verify(cfg.verify, cfg.workers);
    for (const dpsa::VerifyCell& c : rep.enum_cells)
        if (!c.pass)
            std::cout << "FAIL enum " << c.id << " rel_err=" << c.worst << "\n";
    for (const dpsa::VerifyCell& c : rep.mc_cells)
        if (!c.pass) std::cout << "FAIL mc " << c.id << " sigma=" << c.worst << "\n";
    std::cout << "verify: " << rep.enum_cells.size() << " enumeration cells, "
              << rep.mc_cells.size() << " monte-carlo cells, " << rep.failures
              << " failures\n";

    if (!cfg.out_path.empty()) {
        nlohmann::json rec = dpsa::make_record(cfg);
        auto cells_json = [](const std::vector<dpsa::VerifyCell>& cells) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& c : cells)
                arr.push_back({{"id", c.id}, {"worst", c.worst}, {"pass", c.pass}});
            return arr;
        };
        rec["verify"] = {{"enum_cells", cells_json(rep.enum_cells)},
                         {"mc_cells", cells_json(rep.mc_cells)},
                         {"failures", rep.failures}};
        write_text(cfg.out_path, rec.dump(2) + "\n");
        std::cout << "wrote " << cfg.out_path << "\n";
    }
    return rep.ok() ? kExitOk : kExitVerifyFailed;
}

nlohmann::json frontier_point_json(const dpsa::FrontierPoint& p) {
    nlohmann::json j = {{"gain", p.gain},     {"qber", p.qber},
                        {"dc", p.dc},         {"M", p.block_len},
                        {"M_min", p.min_run}, {"q", p.send_prob},
                        {"mu_beta", p.mu_beta},
                        {"strategy", dpsa::strategy_name(p.kind)}};
    if (p.lambda) j["lambda"] = *p.lambda;
    return j;
}

int cmd_assess(const dpsa::RunConfig& cfg) {
    std::ifstream in(cfg.frontier_csv);
    if (!in)
        throw dpsa::ConfigError("cannot open frontier CSV '" + cfg.frontier_csv + "'");
    std::vector<dpsa::FrontierPoint> frontier = dpsa::parse_frontier_csv(in);
    if (frontier.empty()) {
        std::cerr << "frontier CSV contains no points\n";
        return kExitEmptyResult;
    }
    std::sort(frontier.begin(), frontier.end(),
              [](const dpsa::FrontierPoint& a, const dpsa::FrontierPoint& b) {
                  return a.gain < b.gain;
              });

    nlohmann::json rec = dpsa::make_record(cfg);
    nlohmann::json verdicts = nlohmann::json::array();
    for (const dpsa::ExperimentPoint& pt : cfg.points) {
        const dpsa::Assessment a = dpsa::assess_point(pt, frontier);
        nlohmann::json v = {{"label", pt.label},
                            {"gain", pt.gain},
                            {"qber", pt.qber},
                            {"verdict", dpsa::verdict_name(a.verdict)}};
        if (a.required_qber) v["required_qber"] = *a.required_qber;
        if (a.witness) v["dominating_point"] = frontier_point_json(*a.witness);
        verdicts.push_back(v);
        std::cout << pt.label << ": " << dpsa::verdict_name(a.verdict) << "\n";
    }
    rec["verdicts"] = verdicts;
    if (!cfg.out_path.empty()) {
        write_text(cfg.out_path, rec.dump(2) + "\n");
        std::cout << "wrote " << cfg.out_path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential intercept-resend attack analysis for DPS QKD"};
    app.set_version_flag("--version", std::string("dpsa ") + dpsa::kToolVersion);
    app.require_subcommand(1);

    Overrides ov;
    std::string verb;
    for (const char* name : {"evaluate", "frontier", "simulate", "verify", "assess"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", ov.config_path, "JSON run configuration")
            ->required();
        sub->add_option("-o,--out", ov.out_path, "output path (JSON record, or CSV for frontier)");
        sub->add_option("--seed", ov.seed, "override the config seed")
            ->each([&](const std::string&) { ov.seed_set = true; });
        sub->add_option("--workers", ov.workers, "worker threads (never affects results)");
        sub->callback([&verb, name]() { verb = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints the message or help text
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        const dpsa::RunConfig cfg = load_config(ov, verb);
        if (cfg.command == "evaluate") return cmd_evaluate(cfg);
        if (cfg.command == "simulate") return cmd_simulate(cfg);
        if (cfg.command == "frontier") return cmd_frontier(cfg);
        if (cfg.command == "verify") return cmd_verify(cfg);
        if (cfg.command == "assess") return cmd_assess(cfg);
        std::cerr << "error: unknown command '" << cfg.command << "'\n";
        return kExitConfigError;
    } catch (const dpsa::CsvError& e) {
        std::cerr << "error: frontier CSV " << e.what() << "\n";
        return kExitConfigError;
    } catch (const dpsa::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}
