#pragma once

#include <optional>
#include <sstream>
#include <stdexcept>

#include "dpsa/math_util.hpp"
#include "dpsa/signal_model.hpp"

namespace dpsa {

// Eve's block policy: she scores measurement outcomes in blocks of block_len
// pulses and forwards a coherent train only when the longest success run
// reaches min_run (with probability send_prob at exactly min_run, always
// above it). min_run >= floor(block_len/2 + 1) guarantees at most one
// qualifying run per block, which the closed forms rely on.
struct BlockPolicy {
    int block_len = 3;     // M
    int min_run = 2;       // M_min
    double send_prob = 1;  // q, applied only at run length == min_run
    double mu_beta = 1.0;  // intensity of the pulses Eve resends
};

inline void validate_policy(const BlockPolicy& pol) {
    if (pol.block_len < 3)
        throw std::invalid_argument("block_len must be >= 3");
    const int lo = pol.block_len / 2 + 1;
    if (pol.min_run < lo || pol.min_run >= pol.block_len) {
        std::ostringstream msg;
        msg << "min_run = " << pol.min_run << " outside [" << lo << ", "
            << pol.block_len - 1 << "] for block_len = " << pol.block_len;
        throw std::invalid_argument(msg.str());
    }
    if (!(pol.send_prob >= 0.0 && pol.send_prob <= 1.0))
        throw std::invalid_argument("send_prob must be in [0, 1]");
    if (!(pol.mu_beta >= 0.0))
        throw std::invalid_argument("mu_beta must be >= 0");
}

// Probability that a block's final pulse is coherent. Couples adjacent
// blocks: the first interferometer slot of every block pairs against the
// previous block's last pulse.
inline double boundary_prob(double p_succ, const BlockPolicy& pol) {
    validate_policy(pol);
    return (p_succ + (1.0 - p_succ) * pol.send_prob) *
           pow_uint(p_succ, static_cast<unsigned>(pol.min_run));
}

// Probability that Eve sends exactly m trailing coherent pulses reaching the
// end of the block. Summed over its support this reproduces boundary_prob.
inline double run_probability(int m, double p_succ, const BlockPolicy& pol) {
    validate_policy(pol);
    if (m < 0 || m > pol.block_len) {
        std::ostringstream msg;
        msg << "run length m = " << m << " outside [0, " << pol.block_len << "]";
        throw std::domain_error(msg.str());
    }
    if (m < pol.min_run) return 0.0;
    if (m == pol.block_len) return pow_uint(p_succ, static_cast<unsigned>(m));
    const double tail = (1.0 - p_succ) * pow_uint(p_succ, static_cast<unsigned>(m));
    if (m == pol.min_run) {
        // explicit branch instead of send_prob^delta: q = 0 must contribute 0
        return pol.send_prob == 0.0 ? 0.0 : pol.send_prob * tail;
    }
    return tail;
}

namespace detail {

// Shared accumulation for expected clicks / errors per block. The two
// differ only in the per-pair weights: clicks use (cc_pair, cv_pair) =
// (s, t); errors use (pair_error, t/2).
inline double block_sum(const BlockPolicy& pol, double p_succ, double cc_pair,
                        double cv_pair) {
    const double p = boundary_prob(p_succ, pol);
    const int len = pol.block_len;

    // All block_len pulses coherent, pooled over the boundary state.
    const double full_run = (1.0 - 2.0 * p) * cv_pair + (len - 1 + p) * cc_pair;
    double total = p * cv_pair + pow_uint(p_succ, static_cast<unsigned>(len)) * full_run;

    for (int m = pol.min_run; m < len; ++m) {
        double weight = (1.0 - p_succ) * pow_uint(p_succ, static_cast<unsigned>(m));
        if (m == pol.min_run) {
            if (pol.send_prob == 0.0) continue;
            weight *= pol.send_prob;
        }
        if (weight == 0.0) continue;
        // Run touching exactly one block edge (both orders pooled) and run
        // strictly interior with failures on both sides.
        const double edge_run = (3.0 - 2.0 * p) * cv_pair + (2 * m + p - 2) * cc_pair;
        const double interior_run = 2.0 * cv_pair + (m - 1) * cc_pair;
        total += weight * (edge_run + (len - m - 1) * (1.0 - p_succ) * interior_run);
    }
    return total;
}

// Aggregate multiplying both the error count (t * S) and the double-click
// count (2 d S) in the zero-misidentification strategies.
inline double error_weight(const BlockPolicy& pol, double p_succ) {
    const double p = boundary_prob(p_succ, pol);
    const int len = pol.block_len;
    double s_agg = p / 2.0 + pow_uint(p_succ, static_cast<unsigned>(len)) * (0.5 - p);
    for (int m = pol.min_run; m < len; ++m) {
        double weight = (1.0 - p_succ) * pow_uint(p_succ, static_cast<unsigned>(m));
        if (m == pol.min_run) {
            if (pol.send_prob == 0.0) continue;
            weight *= pol.send_prob;
        }
        if (weight == 0.0) continue;
        s_agg += weight * ((1.5 - p) + (len - m - 1) * (1.0 - p_succ));
    }
    return s_agg;
}

}  // namespace detail

// Expected clicks at Bob per block.
inline double expected_clicks(const BlockPolicy& pol, double p_succ) {
    validate_policy(pol);
    const DetectionProbs det = detection_probs(pol.mu_beta);
    return detail::block_sum(pol, p_succ, det.cc_click, det.cv_click);
}

// Expected errors per block when Eve never misidentifies a pulse: every
// error comes from a coherent/vacuum slot, each contributing t/2.
inline double expected_errors_usd(const BlockPolicy& pol, double p_succ) {
    validate_policy(pol);
    const DetectionProbs det = detection_probs(pol.mu_beta);
    return det.cv_click * detail::error_weight(pol, p_succ);
}

// Expected errors per block with per-pulse misidentification: adds the
// coherent/coherent error channel. Collapses to expected_errors_usd when
// model.p_err = 0.
inline double expected_errors_med(const BlockPolicy& pol, const PerSignalModel& model) {
    validate_policy(pol);
    const DetectionProbs det = detection_probs(pol.mu_beta);
    const double pair_err = pair_error_prob(model, det);
    return detail::block_sum(pol, model.p_succ, pair_err, det.cv_click / 2.0);
}

// Expected double clicks per block; identical form for all strategies since
// only coherent/vacuum slots can double-click.
inline double expected_double_clicks(const BlockPolicy& pol, double p_succ) {
    validate_policy(pol);
    const DetectionProbs det = detection_probs(pol.mu_beta);
    return 2.0 * det.cv_double * detail::error_weight(pol, p_succ);
}

// The observable triple. qber is empty when the gain is exactly zero
// (0/0), so downstream consumers can skip such points deterministically.
struct AttackMetrics {
    double gain = 0.0;
    std::optional<double> qber;
    double dc = 0.0;
};

inline AttackMetrics metrics(const SourceParams& src, const Strategy& strat,
                             const BlockPolicy& pol) {
    validate_source(src);
    validate_policy(pol);
    const PerSignalModel model = per_signal_model(src, strat);

    const double clicks = expected_clicks(pol, model.p_succ);
    const double errors = (strat.kind == StrategyKind::Med)
                              ? expected_errors_med(pol, model)
                              : expected_errors_usd(pol, model.p_succ);
    const double dclicks = expected_double_clicks(pol, model.p_succ);

    AttackMetrics m;
    m.gain = clicks / pol.block_len;
    m.dc = dclicks / pol.block_len;
    if (m.gain > 0.0) m.qber = errors / clicks;
    return m;
}

// Closed-form limit of the highest-gain configuration (block_len = 3,
// min_run = 2, send_prob = 1, mu_beta -> infinity).
inline AttackMetrics max_gain_point(double p_succ) {
    if (!(p_succ >= 0.0 && p_succ <= 1.0))
        throw std::domain_error("p_succ must be in [0, 1]");
    const double c = 6.0 - 2.0 * p_succ - p_succ * p_succ;
    const double e = 2.0 - p_succ - p_succ * p_succ;
    AttackMetrics m;
    m.gain = c * p_succ * p_succ / 3.0;
    if (m.gain > 0.0) m.qber = e / c;
    m.dc = 2.0 * e * p_succ * p_succ / 3.0;
    return m;
}

}  // namespace dpsa
