// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Covers the closed-form limits, the oracle-equivalence sweep, Monte-Carlo
// agreement, frontier orderings and end-to-end CLI determinism.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpsa/csv.hpp"
#include "dpsa/frontier.hpp"
#include "dpsa/pulse_train_sim.hpp"
#include "dpsa/verify.hpp"

using namespace dpsa;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---- criterion 1: closed forms vs exact enumeration over the full sweep ----
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    VerifyOptions opt;  // defaults are exactly the sweep under test
    opt.mc_blocks = 0;
    opt.rel_tol = 1e-9;
    const VerifyReport rep = run_verify(opt, 2);
    double worst = 0.0;
    for (const VerifyCell& c : rep.enum_cells) worst = std::max(worst, c.worst);
    const double dt = seconds_since(t0);
    report(1, rep.ok() && dt < 30.0,
           std::to_string(rep.enum_cells.size()) + " cells, worst rel err " +
               fmt(worst) + ", " + fmt(dt) + " s");
}

// ---- criterion 2: Monte Carlo within 4 standard errors ----
void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const SourceParams src{0.16};
    const BlockPolicy pol{5, 3, 0.5, 0.8};
    const AttackMetrics closed = metrics(src, Strategy::usd(), pol);
    const ChainEstimates mc = simulate_chain(src, Strategy::usd(), pol, 1000000, 424242, 2);
    const double dg = std::abs(mc.gain.mean - closed.gain) / mc.gain.std_error;
    const double dq = std::abs(mc.qber->mean - *closed.qber) / mc.qber->std_error;
    const double dd = std::abs(mc.dc.mean - closed.dc) / mc.dc.std_error;
    const double dt = seconds_since(t0);
    report(2, dg <= 4.0 && dq <= 4.0 && dd <= 4.0 && dt < 60.0,
           "1e6 blocks, deviations (sigma): gain " + fmt(dg) + ", qber " + fmt(dq) +
               ", dc " + fmt(dd) + ", " + fmt(dt) + " s");
}

// ---- criterion 3: identity-filter limit ----
void criterion_3() {
    double worst = 0.0;
    for (double mu_a : {0.16, 0.2}) {
        for (double mu_b : {0.5, 1.0, 2.0}) {
            for (const BlockPolicy pol :
                 {BlockPolicy{3, 2, 1.0, mu_b}, BlockPolicy{5, 3, 0.5, mu_b},
                  BlockPolicy{8, 5, 0.0, mu_b}}) {
                const AttackMetrics m = metrics({mu_a}, Strategy::med(1.0), pol);
                worst = std::max(worst, std::abs(m.gain - (-std::expm1(-mu_b))));
                worst = std::max(worst, std::abs(*m.qber - std::exp(-4.0 * mu_a) / 2.0));
                worst = std::max(worst, std::abs(m.dc));
            }
        }
    }
    report(3, worst <= 1e-12, "worst abs deviation " + fmt(worst));
}

// ---- criterion 4: maximum-gain limit ----
void criterion_4() {
    double worst = 0.0;
    for (double mu_a : {0.16, 0.2}) {
        const AttackMetrics m = metrics({mu_a}, Strategy::usd(), {3, 2, 1.0, 50.0});
        const AttackMetrics lim = max_gain_point(usd_success({mu_a}));
        worst = std::max(worst, std::abs(m.gain - lim.gain));
        worst = std::max(worst, std::abs(*m.qber - *lim.qber));
        worst = std::max(worst, std::abs(m.dc - lim.dc));
    }
    report(4, worst <= 1e-6, "worst abs deviation " + fmt(worst));
}

// ---- criterion 5: minimum-gain limit ----
void criterion_5() {
    bool pass = true;
    std::string detail;
    for (double mu_a : {0.16, 0.2}) {
        const double ps = usd_success({mu_a});
        const AttackMetrics m = metrics({mu_a}, Strategy::usd(), {20, 19, 0.0, 50.0});
        const DetectionProbs det = detection_probs(50.0);
        const double ratio = m.gain / pow_uint(ps, 20);
        const bool g_ok = ratio >= 0.99 && ratio <= 1.01;
        const bool q_ok = *m.qber <= 1.05 * det.cv_click / 20.0;
        pass = pass && g_ok && q_ok;
        if (!detail.empty()) detail += "; ";
        detail += "mu_alpha " + fmt(mu_a) + ": G/p^20 = " + fmt(ratio) +
                  (g_ok ? "" : " (outside [0.99,1.01]; stationary boundary keeps a "
                               "(2t+19s)/20 factor that the single-block idealization "
                               "drops)") +
                  ", qber bound " + (q_ok ? "ok" : "violated");
    }
    report(5, pass, detail);
}

// ---- criterion 6: filter endpoint reduces to the unambiguous attack ----
void criterion_6() {
    double worst = 0.0;
    long long cells = 0;
    for (double mu_a : {0.16, 0.2}) {
        const SourceParams src{mu_a};
        const BasisCoeffs c = basis_coeffs(src);
        const Strategy med_lo = Strategy::med(c.b / c.a);
        for (int m = 3; m <= 8; ++m) {
            for (int mm = m / 2 + 1; mm < m; ++mm) {
                for (double q : {0.0, 0.3, 1.0}) {
                    for (double mb : {0.1, 1.0, 10.0}) {
                        const BlockPolicy pol{m, mm, q, mb};
                        const AttackMetrics a = metrics(src, med_lo, pol);
                        const AttackMetrics b = metrics(src, Strategy::usd(), pol);
                        worst = std::max(worst, std::abs(a.gain - b.gain));
                        worst = std::max(worst, std::abs(a.dc - b.dc));
                        if (a.qber.has_value() != b.qber.has_value()) worst = 1.0;
                        else if (a.qber) worst = std::max(worst, std::abs(*a.qber - *b.qber));
                        ++cells;
                    }
                }
            }
        }
    }
    report(6, worst <= 1e-12,
           std::to_string(cells) + " cells, worst abs deviation " + fmt(worst));
}

// ---- criteria 7/8 share full-size frontiers ----
SweepConfig default_sweep(StrategyKind family, double dc_cap) {
    SweepConfig cfg;
    cfg.source = {0.16};
    cfg.family = family;
    cfg.dc_cap = dc_cap;
    return cfg;
}

void criterion_7() {
    const FrontierResult usd = build_frontier(default_sweep(StrategyKind::Usd, 1e-8), 2);
    const FrontierResult bob =
        build_frontier(default_sweep(StrategyKind::BobDevice, 1e-8), 2);
    if (usd.points.empty() || bob.points.empty()) {
        report(7, false, "empty frontier");
        return;
    }
    const double lo = std::max(usd.points.front().gain, bob.points.front().gain);
    const double hi = std::min(usd.points.back().gain, bob.points.back().gain);
    std::set<double> gains;
    for (const FrontierPoint& p : usd.points)
        if (p.gain >= lo && p.gain <= hi) gains.insert(p.gain);
    for (const FrontierPoint& p : bob.points)
        if (p.gain >= lo && p.gain <= hi) gains.insert(p.gain);
    long long violations = 0, strict = 0;
    double worst = 0.0;
    for (double g : gains) {
        const auto qu = frontier_qber_at(usd.points, g);
        const auto qb = frontier_qber_at(bob.points, g);
        if (!qu || !qb) continue;
        if (*qu > *qb + 1e-12) {
            ++violations;
            worst = std::max(worst, *qu - *qb);
        }
        if (*qu < *qb - 1e-12) ++strict;
    }
    report(7, violations == 0 && strict >= 1,
           std::to_string(gains.size()) + " common gains, " +
               std::to_string(violations) + " violations, " + std::to_string(strict) +
               " strictly lower" + (violations ? ", worst " + fmt(worst) : ""));
}

void criterion_8() {
    const double caps[3] = {1e-12, 1e-10, 1e-8};
    FrontierResult fronts[3];
    for (int i = 0; i < 3; ++i)
        fronts[i] = build_frontier(default_sweep(StrategyKind::Usd, caps[i]), 2);
    bool pass = true;
    std::string detail;
    for (int t = 0; t < 3; ++t) {
        for (int l = t + 1; l < 3; ++l) {
            const auto& tight = fronts[t].points;
            const auto& loose = fronts[l].points;
            if (tight.empty() || loose.empty()) {
                pass = false;
                continue;
            }
            long long violations = 0;
            for (const FrontierPoint& p : tight) {
                if (p.gain > loose.back().gain) {
                    ++violations;  // looser cap must reach at least as far
                    continue;
                }
                const auto ql = frontier_qber_at(loose, p.gain);
                if (ql && *ql > p.qber + 1e-12) ++violations;
            }
            pass = pass && violations == 0;
            if (!detail.empty()) detail += "; ";
            detail += fmt(caps[t]) + " vs " + fmt(caps[l]) + ": " +
                      std::to_string(violations) + " violations";
        }
    }
    report(8, pass, detail);
}

// ---- criterion 9: CLI determinism across runs and worker counts ----
fs::path scratch_dir() {
    static fs::path dir = [] {
        std::string tmpl = (fs::temp_directory_path() / "dpsa_accept_XXXXXX").string();
        char* made = mkdtemp(tmpl.data());
        if (!made) throw std::runtime_error("mkdtemp failed");
        return fs::path(made);
    }();
    return dir;
}

bool run_cli(const std::string& args) {
    const std::string cmd =
        std::string(DPSA_CLI_PATH) + " " + args + " >/dev/null 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return rc != -1 && WEXITSTATUS(rc) == 0;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

void criterion_9() {
    const fs::path dir = scratch_dir();
    const fs::path fcfg = dir / "frontier.json";
    write_file(fcfg, R"({
        "source": {"mu_alpha": 0.16},
        "sweep": {"strategy": {"kind": "usd"}, "M_range": [3, 15], "dc_cap": 1e-8}
    })");
    const fs::path scfg = dir / "simulate.json";
    write_file(scfg, R"({
        "source": {"mu_alpha": 0.16},
        "strategy": {"kind": "usd"},
        "policy": {"M": 5, "M_min": 3, "q": 0.5, "mu_beta": 0.8},
        "n_blocks": 200000,
        "seed": 99,
        "timestamp": "acceptance-pinned"
    })");

    bool ok = true;
    std::string detail;

    const fs::path f1 = dir / "f1.csv", f2 = dir / "f2.csv", f4 = dir / "f4.csv";
    ok = ok && run_cli("frontier -c " + fcfg.string() + " -o " + f1.string() +
                       " --workers 1");
    ok = ok && run_cli("frontier -c " + fcfg.string() + " -o " + f2.string() +
                       " --workers 1");
    ok = ok && run_cli("frontier -c " + fcfg.string() + " -o " + f4.string() +
                       " --workers 4");
    const bool frontier_ok =
        ok && !slurp(f1).empty() && slurp(f1) == slurp(f2) && slurp(f1) == slurp(f4);
    detail += std::string("frontier csv ") + (frontier_ok ? "byte-identical" : "differs");

    const fs::path s1 = dir / "s1.json", s2 = dir / "s2.json", s4 = dir / "s4.json";
    ok = run_cli("simulate -c " + scfg.string() + " -o " + s1.string() + " --workers 1");
    ok = ok && run_cli("simulate -c " + scfg.string() + " -o " + s2.string() +
                       " --workers 1");
    ok = ok && run_cli("simulate -c " + scfg.string() + " -o " + s4.string() +
                       " --workers 4");
    const bool simulate_ok =
        ok && !slurp(s1).empty() && slurp(s1) == slurp(s2) && slurp(s1) == slurp(s4);
    detail += std::string(", simulate record ") +
              (simulate_ok ? "byte-identical" : "differs");

    report(9, frontier_ok && simulate_ok, detail + " (runs x2, workers {1,4})");
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("%d of 9 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
