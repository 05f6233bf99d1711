#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dpsa {

// Alice's source: weak coherent pulses with mean photon number mu_alpha.
// mu_alpha = 0 is accepted as a degenerate input (identical signal states).
struct SourceParams {
    double mu_alpha = 0.0;
};

inline void validate_source(const SourceParams& src) {
    if (!(src.mu_alpha >= 0.0))
        throw std::domain_error("mu_alpha must be >= 0");
}

// Click probabilities of Bob's one-pulse-delay interferometer for the pulse
// pairs Eve can produce:
//   cc_click     - aligned coherent/coherent pair, all intensity on one detector
//   cv_click     - coherent/vacuum (either order), intensity split over both
//   cv_double    - both detectors fire on a coherent/vacuum pair
// Computed with expm1 so the small-mu_beta tail keeps full precision.
struct DetectionProbs {
    double cc_click = 0.0;
    double cv_click = 0.0;
    double cv_double = 0.0;
    double mu_beta = 0.0;
};

inline DetectionProbs detection_probs(double mu_beta) {
    if (!(mu_beta >= 0.0))
        throw std::domain_error("mu_beta must be >= 0");
    DetectionProbs det;
    det.mu_beta = mu_beta;
    det.cc_click = -std::expm1(-mu_beta);
    det.cv_click = -std::expm1(-mu_beta / 2.0);
    const double one_arm = -std::expm1(-mu_beta / 4.0);
    det.cv_double = one_arm * one_arm;
    return det;
}

// Probability that unambiguous discrimination of |alpha> vs |-alpha>
// yields a conclusive outcome: 1 - |<alpha|-alpha>| = 1 - e^(-2 mu_alpha).
inline double usd_success(const SourceParams& src) {
    validate_source(src);
    return -std::expm1(-2.0 * src.mu_alpha);
}

// Success probability when Eve uses the same detection device as Bob:
// a click happens with 1 - e^(-mu_alpha), strictly below the USD rate.
inline double bobdevice_success(const SourceParams& src) {
    validate_source(src);
    return -std::expm1(-src.mu_alpha);
}

// The two signal states live in a two-dimensional span; in the orthonormal
// basis aligned with their symmetric/antisymmetric components they read
// a|0> +- b|1> with a >= b >= 0 and a^2 + b^2 = 1.
struct BasisCoeffs {
    double a = 1.0;
    double b = 0.0;
};

inline BasisCoeffs basis_coeffs(const SourceParams& src) {
    validate_source(src);
    const double overlap = std::exp(-2.0 * src.mu_alpha);  // <alpha|-alpha>
    BasisCoeffs c;
    c.a = std::sqrt((1.0 + overlap) / 2.0);
    c.b = std::sqrt(-std::expm1(-2.0 * src.mu_alpha) / 2.0);
    return c;
}

// Per-pulse behaviour of Eve's measurement: probability it succeeds, and
// probability a success assigns the wrong phase. p_err is identically zero
// for the unambiguous and Bob-device strategies.
struct PerSignalModel {
    double p_succ = 0.0;
    double p_err = 0.0;
};

// Outcome of the filtering operation followed by minimum-error readout.
// kept_amp0/kept_amp1 are the normalized coefficients of the filtered state
// (the second carries the +- sign of the input state).
struct MedFilterResult {
    PerSignalModel model;
    double kept_amp0 = 0.0;
    double kept_amp1 = 0.0;
};

// lambda = b/a reproduces the unambiguous measurement (p_err = 0); lambda = 1
// is the identity filter (p_succ = 1, maximal p_err). Endpoints are accepted
// within 1e-12 and clamped so that lambda = b/a is representable exactly.
inline MedFilterResult med_filter(const SourceParams& src, double lambda) {
    const BasisCoeffs c = basis_coeffs(src);
    const double lo = (c.a > 0.0) ? c.b / c.a : 1.0;
    constexpr double kEdgeTol = 1e-12;
    if (!(lambda >= lo - kEdgeTol) || !(lambda <= 1.0 + kEdgeTol)) {
        std::ostringstream msg;
        msg << "lambda = " << lambda << " outside the valid interval [b/a, 1] = ["
            << lo << ", 1] for mu_alpha = " << src.mu_alpha;
        throw std::domain_error(msg.str());
    }
    lambda = std::min(std::max(lambda, lo), 1.0);

    MedFilterResult r;
    const double la = lambda * c.a;
    const double p_succ = la * la + c.b * c.b;
    const double diff = la - c.b;
    r.model.p_succ = p_succ;
    r.model.p_err = 0.5 * diff * diff / p_succ;
    const double norm = std::sqrt(p_succ);
    r.kept_amp0 = la / norm;
    r.kept_amp1 = c.b / norm;
    return r;
}

// Probability that a coherent/coherent interferometer slot produces an error:
// exactly one of the two pulses was misidentified (phases anti-aligned) and
// Bob's detector fires. Zero whenever p_err is zero.
inline double pair_error_prob(const PerSignalModel& model, const DetectionProbs& det) {
    return 2.0 * model.p_err * (1.0 - model.p_err) * det.cc_click;
}

enum class StrategyKind { Usd, Med, BobDevice };

struct Strategy {
    StrategyKind kind = StrategyKind::Usd;
    double lambda = 1.0;  // consulted only for Med

    static Strategy usd() { return {StrategyKind::Usd, 1.0}; }
    static Strategy med(double lambda) { return {StrategyKind::Med, lambda}; }
    static Strategy bob_device() { return {StrategyKind::BobDevice, 1.0}; }
};

inline PerSignalModel per_signal_model(const SourceParams& src, const Strategy& strat) {
    switch (strat.kind) {
        case StrategyKind::Usd:
            return {usd_success(src), 0.0};
        case StrategyKind::BobDevice:
            return {bobdevice_success(src), 0.0};
        case StrategyKind::Med:
            return med_filter(src, strat.lambda).model;
    }
    throw std::logic_error("unreachable strategy kind");
}

inline const char* strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Usd: return "usd";
        case StrategyKind::Med: return "med";
        case StrategyKind::BobDevice: return "bob_device";
    }
    return "?";
}

}  // namespace dpsa
