#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dpsa/block_analytics.hpp"
#include "dpsa/math_util.hpp"
#include "dpsa/signal_model.hpp"

namespace dpsa {

struct MuBetaGrid {
    double lo = 1e-4;
    double hi = 1e2;
    int points = 400;
};

// Log-spaced gain levels used to sample each cell's (gain, qber) curve: the
// optimal mu_beta is found per gain band, mirroring "lowest qber at a given
// gain". Band width (24 per decade) is coarser than the mu_beta grid, so no
// band inside a curve's range can fall between two grid points.
struct GainLadder {
    double lo = 1e-10;
    double hi = 1.0;
    int per_decade = 24;
};

struct SweepConfig {
    SourceParams source;
    StrategyKind family = StrategyKind::Usd;
    std::vector<double> lambdas;  // Med only; empty selects the six default values
    int m_lo = 3;
    int m_hi = 41;
    std::vector<double> q_grid;  // empty selects 0, 0.1, ..., 1
    MuBetaGrid mu_beta;
    GainLadder gain_bands;
    std::optional<double> dc_cap;  // empty = unconstrained
};

// Filter strengths used by default for Med sweeps: six equally spaced values
// from the zero-error endpoint b/a up to the identity filter.
inline std::vector<double> default_med_lambdas(const SourceParams& src) {
    const BasisCoeffs c = basis_coeffs(src);
    const double lo = (c.a > 0.0) ? c.b / c.a : 1.0;
    std::vector<double> ls;
    ls.reserve(6);
    for (int k = 0; k <= 5; ++k) ls.push_back(lo + k * (1.0 - lo) / 5.0);
    return ls;
}

inline std::vector<double> default_q_grid() {
    std::vector<double> qs;
    qs.reserve(11);
    for (int k = 0; k <= 10; ++k) qs.push_back(k / 10.0);
    return qs;
}

// min_run is tied to the block length throughout the sweep.
inline int min_run_for(int block_len) { return block_len / 2 + 1; }

struct FrontierPoint {
    double gain = 0.0;
    double qber = 0.0;
    double dc = 0.0;
    int block_len = 0;
    int min_run = 0;
    double send_prob = 0.0;
    double mu_beta = 0.0;
    std::optional<double> lambda;  // present for Med points
    StrategyKind kind = StrategyKind::Usd;
};

struct GainBand {
    double lo = 0.0;
    double hi = 0.0;
};

struct OptimizeResult {
    bool feasible = false;
    double mu_beta = 0.0;
    AttackMetrics metrics;
};

namespace detail {

struct CurvePoint {
    double mu_beta = 0.0;
    AttackMetrics m;
};

inline bool candidate_ok(const AttackMetrics& m, const std::optional<double>& dc_cap,
                         const std::optional<GainBand>& band) {
    if (!m.qber) return false;
    if (dc_cap && m.dc > *dc_cap) return false;
    if (band && (m.gain < band->lo || m.gain > band->hi)) return false;
    return true;
}

// "a is a better optimizer candidate than b": lower qber wins; near-ties
// (flat-qber cells) prefer the larger gain.
inline bool better_candidate(const AttackMetrics& a, const AttackMetrics& b) {
    const double tol = 1e-12 * std::max({std::abs(*a.qber), std::abs(*b.qber), 1e-12});
    if (*a.qber < *b.qber - tol) return true;
    if (*a.qber > *b.qber + tol) return false;
    return a.gain > b.gain;
}

inline OptimizeResult optimize_on_curve(
    const std::vector<CurvePoint>& curve,
    const std::function<AttackMetrics(double)>& eval,
    const std::optional<double>& dc_cap, const std::optional<GainBand>& band) {
    OptimizeResult best;
    int best_idx = -1;
    for (int i = 0; i < static_cast<int>(curve.size()); ++i) {
        const CurvePoint& cp = curve[static_cast<size_t>(i)];
        if (!candidate_ok(cp.m, dc_cap, band)) continue;
        if (!best.feasible || better_candidate(cp.m, best.metrics)) {
            best = {true, cp.mu_beta, cp.m};
            best_idx = i;
        }
    }
    if (!best.feasible) return best;

    // One golden-section pass on the bracket around the best grid point;
    // infeasible probes are simply never adopted.
    const double lo = curve[static_cast<size_t>(std::max(best_idx - 1, 0))].mu_beta;
    const double hi =
        curve[static_cast<size_t>(
                  std::min(best_idx + 1, static_cast<int>(curve.size()) - 1))]
            .mu_beta;
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    AttackMetrics m1 = eval(x1);
    AttackMetrics m2 = eval(x2);
    auto score = [&](const AttackMetrics& m) {
        return candidate_ok(m, dc_cap, band) ? *m.qber
                                             : std::numeric_limits<double>::infinity();
    };
    for (int it = 0; it < 48 && (b - a) > 1e-14 * std::max(1.0, b); ++it) {
        if (score(m1) <= score(m2)) {
            b = x2;
            x2 = x1;
            m2 = m1;
            x1 = b - kInvPhi * (b - a);
            m1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            m1 = m2;
            x2 = a + kInvPhi * (b - a);
            m2 = eval(x2);
        }
        const AttackMetrics& mc = score(m1) <= score(m2) ? m1 : m2;
        const double xc = score(m1) <= score(m2) ? x1 : x2;
        if (candidate_ok(mc, dc_cap, band) && better_candidate(mc, best.metrics))
            best = {true, xc, mc};
    }
    return best;
}

}  // namespace detail

// Grid search over mu_beta (refined by golden section around the best
// bracket) for the lowest qber subject to the double-click cap and an
// optional gain band. Returns feasible = false when nothing qualifies.
inline OptimizeResult optimize_mu_beta(const SourceParams& src, const Strategy& strat,
                                       int block_len, double send_prob,
                                       std::optional<double> dc_cap,
                                       std::optional<GainBand> band = {},
                                       const MuBetaGrid& grid = {}) {
    BlockPolicy pol{block_len, min_run_for(block_len), send_prob, grid.lo};
    validate_policy(pol);
    auto eval = [&](double mu) {
        BlockPolicy p = pol;
        p.mu_beta = mu;
        return metrics(src, strat, p);
    };
    std::vector<detail::CurvePoint> curve;
    curve.reserve(static_cast<size_t>(grid.points));
    for (double mu : log_grid(grid.lo, grid.hi, grid.points))
        curve.push_back({mu, eval(mu)});
    return detail::optimize_on_curve(curve, eval, dc_cap, band);
}

struct FrontierResult {
    std::vector<FrontierPoint> points;
    long long cells = 0;             // (block_len, q, lambda) combinations examined
    long long infeasible_cells = 0;  // cells with no feasible mu_beta at all
    long long candidates = 0;        // banded optimizer hits pooled before Pareto
};

// Evaluates optimize_mu_beta for every (block_len, q, lambda) cell and gain
// band, pools the feasible points and keeps the Pareto-optimal subset,
// sorted by gain ascending. Deterministic for any worker count: cells are
// indexed, outputs merged in index order, ties broken by fixed keys.
inline FrontierResult build_frontier(const SweepConfig& cfg, int workers = 1) {
    validate_source(cfg.source);
    if (cfg.m_lo < 3 || cfg.m_hi < cfg.m_lo)
        throw std::invalid_argument("M range must satisfy 3 <= m_lo <= m_hi");
    if (workers < 1) workers = 1;

    std::vector<double> lambdas;
    if (cfg.family == StrategyKind::Med)
        lambdas = cfg.lambdas.empty() ? default_med_lambdas(cfg.source) : cfg.lambdas;
    else
        lambdas = {0.0};  // placeholder, unused
    const std::vector<double> qs = cfg.q_grid.empty() ? default_q_grid() : cfg.q_grid;

    struct Cell {
        int block_len;
        double q;
        std::optional<double> lambda;
    };
    std::vector<Cell> cells;
    for (const double lam : lambdas)
        for (int m = cfg.m_lo; m <= cfg.m_hi; ++m)
            for (const double q : qs)
                cells.push_back({m, q,
                                 cfg.family == StrategyKind::Med
                                     ? std::optional<double>(lam)
                                     : std::nullopt});

    // gain band edges
    const GainLadder& gl = cfg.gain_bands;
    if (!(gl.lo > 0.0) || !(gl.hi > gl.lo) || gl.per_decade < 1)
        throw std::invalid_argument("invalid gain band ladder");
    const int n_bands = std::max(
        1, static_cast<int>(std::lround(gl.per_decade * std::log10(gl.hi / gl.lo))));
    std::vector<double> edges(static_cast<size_t>(n_bands) + 1);
    for (int i = 0; i <= n_bands; ++i)
        edges[static_cast<size_t>(i)] =
            gl.lo * std::pow(gl.hi / gl.lo, static_cast<double>(i) / n_bands);

    const std::vector<double> mu_grid = log_grid(cfg.mu_beta.lo, cfg.mu_beta.hi,
                                                 cfg.mu_beta.points);

    std::vector<std::vector<FrontierPoint>> per_cell(cells.size());
    std::vector<char> cell_feasible(cells.size(), 0);
    std::atomic<size_t> next{0};

    auto run_cell = [&](size_t idx) {
        const Cell& cell = cells[idx];
        const Strategy strat = cell.lambda ? Strategy::med(*cell.lambda)
                               : cfg.family == StrategyKind::Usd
                                   ? Strategy::usd()
                                   : Strategy::bob_device();
        BlockPolicy pol{cell.block_len, min_run_for(cell.block_len), cell.q,
                        cfg.mu_beta.lo};
        auto eval = [&](double mu) {
            BlockPolicy p = pol;
            p.mu_beta = mu;
            return metrics(cfg.source, strat, p);
        };
        std::vector<detail::CurvePoint> curve;
        curve.reserve(mu_grid.size());
        for (double mu : mu_grid) curve.push_back({mu, eval(mu)});

        bool any = false;
        for (int b = 0; b < n_bands; ++b) {
            const GainBand band{edges[static_cast<size_t>(b)],
                                edges[static_cast<size_t>(b) + 1]};
            const OptimizeResult r =
                detail::optimize_on_curve(curve, eval, cfg.dc_cap, band);
            if (!r.feasible) continue;
            any = true;
            FrontierPoint fp;
            fp.gain = r.metrics.gain;
            fp.qber = *r.metrics.qber;
            fp.dc = r.metrics.dc;
            fp.block_len = cell.block_len;
            fp.min_run = min_run_for(cell.block_len);
            fp.send_prob = cell.q;
            fp.mu_beta = r.mu_beta;
            fp.lambda = cell.lambda;
            fp.kind = cfg.family;
            per_cell[idx].push_back(fp);
        }
        cell_feasible[idx] = any ? 1 : 0;
    };

    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) break;
            run_cell(idx);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    FrontierResult res;
    res.cells = static_cast<long long>(cells.size());
    std::vector<FrontierPoint> all;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (!cell_feasible[i]) ++res.infeasible_cells;
        all.insert(all.end(), per_cell[i].begin(), per_cell[i].end());
    }
    res.candidates = static_cast<long long>(all.size());

    // Pareto sweep: highest gain first, keep strictly improving qber.
    std::sort(all.begin(), all.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        if (a.gain != b.gain) return a.gain > b.gain;
        if (a.qber != b.qber) return a.qber < b.qber;
        if (a.mu_beta != b.mu_beta) return a.mu_beta < b.mu_beta;
        if (a.block_len != b.block_len) return a.block_len < b.block_len;
        if (a.send_prob != b.send_prob) return a.send_prob < b.send_prob;
        return a.lambda.value_or(0.0) < b.lambda.value_or(0.0);
    });
    double best_qber = std::numeric_limits<double>::infinity();
    for (const FrontierPoint& fp : all) {
        if (fp.qber < best_qber) {
            res.points.push_back(fp);
            best_qber = fp.qber;
        }
    }
    std::reverse(res.points.begin(), res.points.end());
    return res;
}

enum class Verdict { InsecureAgainstSequential, NotExcluded };

inline const char* verdict_name(Verdict v) {
    return v == Verdict::InsecureAgainstSequential ? "INSECURE_AGAINST_SEQUENTIAL"
                                                   : "NOT_EXCLUDED";
}

// Experimental operating point supplied by the user. mu_alpha / dc_cap are
// carried along as assessment context.
struct ExperimentPoint {
    std::string label;
    double gain = 0.0;
    double qber = 0.0;
    std::optional<double> mu_alpha;
    std::optional<double> dc_cap;
};

// Lowest qber Eve can reach with gain >= the requested value, over the
// frontier polyline (points sorted by gain, adjacent points joined
// linearly). Empty when the gain exceeds the highest frontier gain. For a
// Pareto frontier this is simply the interpolated curve value, flat below
// the lowest-gain point.
inline std::optional<double> frontier_qber_at(const std::vector<FrontierPoint>& frontier,
                                              double gain) {
    if (frontier.empty()) throw std::invalid_argument("empty frontier");
    if (gain > frontier.back().gain) return std::nullopt;
    double best = std::numeric_limits<double>::infinity();
    for (const FrontierPoint& fp : frontier)
        if (fp.gain >= gain) best = std::min(best, fp.qber);
    for (size_t i = 0; i + 1 < frontier.size(); ++i) {
        const FrontierPoint& lo = frontier[i];
        const FrontierPoint& hi = frontier[i + 1];
        if (lo.gain <= gain && gain <= hi.gain) {
            const double span = hi.gain - lo.gain;
            const double w = span > 0.0 ? (gain - lo.gain) / span : 0.0;
            best = std::min(best, lo.qber + w * (hi.qber - lo.qber));
        }
    }
    return best;
}

struct Assessment {
    Verdict verdict = Verdict::NotExcluded;
    // lowest qber Eve can reach at gain >= point.gain (empty: unreachable gain)
    std::optional<double> required_qber;
    // an actual frontier point dominating the experiment point, if one exists
    std::optional<FrontierPoint> witness;
};

// The observed point is reproducible by Eve (INSECURE) iff some frontier
// point -- interpolated linearly between neighbours -- reaches at least its
// gain with at most its qber.
inline Assessment assess_point(const ExperimentPoint& point,
                               const std::vector<FrontierPoint>& frontier) {
    if (frontier.empty()) throw std::invalid_argument("empty frontier");
    Assessment res;
    res.required_qber = frontier_qber_at(frontier, point.gain);
    if (!res.required_qber) {
        res.verdict = Verdict::NotExcluded;
        return res;
    }
    res.verdict = point.qber >= *res.required_qber
                      ? Verdict::InsecureAgainstSequential
                      : Verdict::NotExcluded;
    if (res.verdict == Verdict::InsecureAgainstSequential) {
        // report an actual frontier row dominating the point, when one
        // exists (interpolation alone can also carry the verdict)
        const FrontierPoint* best = nullptr;
        for (const FrontierPoint& fp : frontier)
            if (fp.gain >= point.gain && fp.qber <= point.qber &&
                (!best || fp.qber < best->qber))
                best = &fp;
        if (best) res.witness = *best;
    }
    return res;
}

}  // namespace dpsa
