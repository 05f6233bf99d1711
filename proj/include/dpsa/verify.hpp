#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dpsa/block_analytics.hpp"
#include "dpsa/frontier.hpp"
#include "dpsa/pulse_train_sim.hpp"

namespace dpsa {

// Cross-validation sweep: the closed forms against the exact enumeration
// over every cell, plus Monte-Carlo spot checks against the closed forms.
struct VerifyOptions {
    std::vector<double> mu_alphas{0.16, 0.2};
    int m_lo = 3;
    int m_hi = 8;  // enumeration cost is 2^M per cell
    std::vector<double> q_grid{0.0, 0.3, 1.0};
    std::vector<double> mu_betas{0.1, 1.0, 10.0};
    // Strategy families; "med" expands to {b/a, midpoint, 1} per mu_alpha.
    std::vector<StrategyKind> families{StrategyKind::Usd, StrategyKind::Med,
                                       StrategyKind::BobDevice};
    double rel_tol = 1e-9;
    long long mc_blocks = 200000;  // 0 disables the Monte-Carlo stage
    double mc_sigmas = 4.0;
    std::uint64_t seed = 20240801;
};

struct VerifyCell {
    std::string id;
    double worst = 0.0;  // relative error (enum stage) or sigma deviation (MC stage)
    bool pass = true;
};

struct VerifyReport {
    std::vector<VerifyCell> enum_cells;
    std::vector<VerifyCell> mc_cells;
    long long failures = 0;
    bool ok() const { return failures == 0; }
};

using MetricsFn =
    std::function<AttackMetrics(const SourceParams&, const Strategy&, const BlockPolicy&)>;

namespace detail {

inline std::vector<Strategy> expand_strategies(const VerifyOptions& opt,
                                               const SourceParams& src) {
    std::vector<Strategy> out;
    for (StrategyKind k : opt.families) {
        switch (k) {
            case StrategyKind::Usd: out.push_back(Strategy::usd()); break;
            case StrategyKind::BobDevice: out.push_back(Strategy::bob_device()); break;
            case StrategyKind::Med: {
                const BasisCoeffs c = basis_coeffs(src);
                const double lo = c.b / c.a;
                out.push_back(Strategy::med(lo));
                out.push_back(Strategy::med((lo + 1.0) / 2.0));
                out.push_back(Strategy::med(1.0));
                break;
            }
        }
    }
    return out;
}

inline std::string cell_id(const SourceParams& src, const Strategy& strat,
                           const BlockPolicy& pol) {
    std::ostringstream os;
    os << strategy_name(strat.kind);
    if (strat.kind == StrategyKind::Med) os << "(lambda=" << strat.lambda << ")";
    os << " mu_alpha=" << src.mu_alpha << " M=" << pol.block_len
       << " M_min=" << pol.min_run << " q=" << pol.send_prob
       << " mu_beta=" << pol.mu_beta;
    return os.str();
}

}  // namespace detail

inline VerifyReport run_verify(const VerifyOptions& opt, int workers = 1,
                               const MetricsFn& analytic = {}) {
    const MetricsFn eval = analytic ? analytic
                                    : [](const SourceParams& s, const Strategy& st,
                                         const BlockPolicy& p) { return metrics(s, st, p); };
    if (workers < 1) workers = 1;

    struct CellSpec {
        SourceParams src;
        Strategy strat;
        BlockPolicy pol;
    };
    std::vector<CellSpec> specs;
    for (double mu_a : opt.mu_alphas) {
        const SourceParams src{mu_a};
        for (const Strategy& strat : detail::expand_strategies(opt, src))
            for (int m = opt.m_lo; m <= opt.m_hi; ++m)
                for (int mm = m / 2 + 1; mm < m; ++mm)
                    for (double q : opt.q_grid)
                        for (double mb : opt.mu_betas)
                            specs.push_back({src, strat, BlockPolicy{m, mm, q, mb}});
    }

    VerifyReport report;
    report.enum_cells.resize(specs.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= specs.size()) break;
            const CellSpec& c = specs[i];
            VerifyCell cell;
            cell.id = detail::cell_id(c.src, c.strat, c.pol);
            const AttackMetrics a = eval(c.src, c.strat, c.pol);
            const EnumerationResult e = enumerate_exact(c.src, c.strat, c.pol);
            double worst = rel_diff(a.gain, e.metrics.gain);
            worst = std::max(worst, rel_diff(a.dc, e.metrics.dc));
            if (a.qber.has_value() != e.metrics.qber.has_value())
                worst = 1.0;
            else if (a.qber)
                worst = std::max(worst, rel_diff(*a.qber, *e.metrics.qber));
            cell.worst = worst;
            cell.pass = worst <= opt.rel_tol;
            report.enum_cells[i] = cell;
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    // Monte-Carlo spot checks: one representative cell per strategy family
    // and mu_alpha, compared against the analytic triple within mc_sigmas.
    if (opt.mc_blocks > 0) {
        for (double mu_a : opt.mu_alphas) {
            const SourceParams src{mu_a};
            for (StrategyKind k : opt.families) {
                Strategy strat = Strategy::usd();
                BlockPolicy pol{5, 3, 0.5, 0.8};
                switch (k) {
                    case StrategyKind::Usd: break;
                    case StrategyKind::BobDevice:
                        strat = Strategy::bob_device();
                        pol = BlockPolicy{3, 2, 1.0, 2.0};
                        break;
                    case StrategyKind::Med: {
                        const BasisCoeffs c = basis_coeffs(src);
                        strat = Strategy::med((c.b / c.a + 1.0) / 2.0);
                        pol = BlockPolicy{4, 3, 0.3, 1.0};
                        break;
                    }
                }
                VerifyCell cell;
                cell.id = std::string("mc ") + detail::cell_id(src, strat, pol);
                const AttackMetrics a = eval(src, strat, pol);
                const ChainEstimates mc =
                    simulate_chain(src, strat, pol, opt.mc_blocks, opt.seed, workers);
                auto sigmas = [](const McEstimate& est, double target) {
                    const double se = est.std_error > 0 ? est.std_error : 1e-300;
                    return std::abs(est.mean - target) / se;
                };
                double worst = sigmas(mc.gain, a.gain);
                worst = std::max(worst, sigmas(mc.dc, a.dc));
                if (a.qber && mc.qber) worst = std::max(worst, sigmas(*mc.qber, *a.qber));
                else if (a.qber.has_value() != mc.qber.has_value())
                    worst = 1e9;
                cell.worst = worst;
                cell.pass = worst <= opt.mc_sigmas;
                report.mc_cells.push_back(cell);
            }
        }
    }

    for (const VerifyCell& c : report.enum_cells)
        if (!c.pass) ++report.failures;
    for (const VerifyCell& c : report.mc_cells)
        if (!c.pass) ++report.failures;
    return report;
}

}  // namespace dpsa
