#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dpsa/block_analytics.hpp"
#include "dpsa/pulse_train_sim.hpp"

using namespace dpsa;
using Catch::Approx;

namespace {
const SourceParams kSrc016{0.16};
const double kPsucc016 = usd_success(kSrc016);  // 0.27385096...
}  // namespace

TEST_CASE("policy validation") {
    REQUIRE_NOTHROW(validate_policy({3, 2, 1.0, 1.0}));
    REQUIRE_NOTHROW(validate_policy({5, 3, 0.0, 0.0}));
    REQUIRE_THROWS_AS(validate_policy({2, 1, 0.5, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(validate_policy({7, 3, 0.5, 1.0}), std::invalid_argument);  // below floor(M/2+1)
    REQUIRE_THROWS_AS(validate_policy({5, 5, 0.5, 1.0}), std::invalid_argument);  // min_run == M
    REQUIRE_THROWS_AS(validate_policy({5, 3, 1.5, 1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(validate_policy({5, 3, 0.5, -1.0}), std::invalid_argument);
}

TEST_CASE("boundary_prob") {
    SECTION("always-send, always-succeed limits") {
        REQUIRE(boundary_prob(1.0, {5, 3, 0.5, 1.0}) == 1.0);
        REQUIRE(boundary_prob(0.5, {4, 3, 1.0, 1.0}) == Approx(std::pow(0.5, 3)).epsilon(1e-15));
    }
    SECTION("frozen value") {
        REQUIRE(boundary_prob(0.27385, {5, 3, 0.5, 1.0}) ==
                Approx(0.013080565852393249).epsilon(1e-13));
    }
    SECTION("equals the sum of run probabilities") {
        for (const BlockPolicy pol :
             {BlockPolicy{5, 3, 0.5, 1.0}, BlockPolicy{8, 5, 0.0, 1.0},
              BlockPolicy{6, 4, 1.0, 1.0}, BlockPolicy{3, 2, 0.3, 1.0}}) {
            for (double ps : {0.0, 0.1, 0.27385096292630906, 0.7, 1.0}) {
                double sum = 0.0;
                for (int m = 0; m <= pol.block_len; ++m)
                    sum += run_probability(m, ps, pol);
                REQUIRE(boundary_prob(ps, pol) == Approx(sum).margin(1e-12));
            }
        }
    }
}

TEST_CASE("run_probability") {
    const BlockPolicy pol{4, 3, 0.5, 1.0};
    REQUIRE(run_probability(2, 0.5, pol) == 0.0);  // below min_run
    REQUIRE(run_probability(4, 0.5, pol) == Approx(0.0625).epsilon(1e-15));
    REQUIRE(run_probability(3, 0.5, pol) == Approx(0.5 * 0.5 * 0.125).epsilon(1e-15));
    REQUIRE_THROWS_AS(run_probability(-1, 0.5, pol), std::domain_error);
    REQUIRE_THROWS_AS(run_probability(5, 0.5, pol), std::domain_error);
    SECTION("q = 0 contributes exactly nothing at the threshold") {
        REQUIRE(run_probability(3, 0.5, {4, 3, 0.0, 1.0}) == 0.0);
    }
}

TEST_CASE("expected counts, frozen cell M=5 M_min=3 q=0.5 mu_beta=0.8") {
    const BlockPolicy pol{5, 3, 0.5, 0.8};
    REQUIRE(expected_clicks(pol, kPsucc016) ==
            Approx(0.059059650895200544).epsilon(1e-12));
    REQUIRE(expected_errors_usd(pol, kPsucc016) ==
            Approx(0.009845798702685234).epsilon(1e-12));
    REQUIRE(expected_double_clicks(pol, kPsucc016) ==
            Approx(0.0019626220243552576).epsilon(1e-12));
}

TEST_CASE("expected counts, degenerate inputs") {
    const BlockPolicy pol{5, 3, 0.5, 0.8};
    REQUIRE(expected_clicks(pol, 0.0) == 0.0);
    REQUIRE(expected_errors_usd(pol, 0.0) == 0.0);
    REQUIRE(expected_errors_usd(pol, 1.0) == Approx(0.0).margin(1e-15));
    REQUIRE(expected_double_clicks(pol, 1.0) == Approx(0.0).margin(1e-15));
    SECTION("saturated detectors push double clicks to 2S") {
        const BlockPolicy sat{5, 3, 0.5, 200.0};
        const double s_agg = expected_errors_usd(sat, kPsucc016) /
                             detection_probs(sat.mu_beta).cv_click;
        REQUIRE(expected_double_clicks(sat, kPsucc016) ==
                Approx(2.0 * s_agg).epsilon(1e-9));
    }
}

TEST_CASE("expected_errors_med") {
    const BlockPolicy pol{5, 3, 0.3, 1.0};
    const BasisCoeffs c = basis_coeffs(kSrc016);

    SECTION("collapses to the zero-misidentification form at lambda = b/a") {
        const PerSignalModel med = med_filter(kSrc016, c.b / c.a).model;
        REQUIRE(expected_errors_med(pol, med) ==
                Approx(expected_errors_usd(pol, med.p_succ)).margin(1e-12));
    }
    SECTION("identity filter: all-coherent stream, block_len * pair error") {
        const PerSignalModel med = med_filter(kSrc016, 1.0).model;
        const DetectionProbs det = detection_probs(pol.mu_beta);
        const double expected = pol.block_len * 0.5 * std::exp(-4.0 * 0.16) * det.cc_click;
        REQUIRE(expected_errors_med(pol, med) == Approx(expected).epsilon(1e-12));
    }
    SECTION("frozen midpoint cell") {
        const double mid = (c.b / c.a + 1.0) / 2.0;
        const PerSignalModel med = med_filter(kSrc016, mid).model;
        REQUIRE(expected_errors_med(pol, med) ==
                Approx(0.12134830971633308).epsilon(1e-12));
    }
}

TEST_CASE("metrics") {
    SECTION("identity-filter limits are exact") {
        for (double mu_a : {0.16, 0.2}) {
            for (double mu_b : {0.5, 1.0, 2.0}) {
                const AttackMetrics m =
                    metrics({mu_a}, Strategy::med(1.0), {5, 3, 0.5, mu_b});
                REQUIRE(m.gain == Approx(-std::expm1(-mu_b)).margin(1e-12));
                REQUIRE(m.qber.has_value());
                REQUIRE(*m.qber == Approx(std::exp(-4.0 * mu_a) / 2.0).margin(1e-12));
                REQUIRE(m.dc == Approx(0.0).margin(1e-12));
            }
        }
    }
    SECTION("max-gain configuration matches the closed-form limit") {
        for (double mu_a : {0.16, 0.2}) {
            const double ps = usd_success({mu_a});
            const AttackMetrics m = metrics({mu_a}, Strategy::usd(), {3, 2, 1.0, 50.0});
            const AttackMetrics lim = max_gain_point(ps);
            REQUIRE(m.gain == Approx(lim.gain).margin(1e-6));
            REQUIRE(*m.qber == Approx(*lim.qber).margin(1e-6));
            REQUIRE(m.dc == Approx(lim.dc).margin(1e-6));
        }
    }
    SECTION("min-gain configuration: stationary boundary keeps a (2t+19s)/20 factor") {
        const double ps = kPsucc016;
        const AttackMetrics m = metrics(kSrc016, Strategy::usd(), {20, 19, 0.0, 50.0});
        const DetectionProbs det = detection_probs(50.0);
        const double expected_ratio =
            (2.0 * det.cv_click + 19.0 * det.cc_click) / 20.0;
        REQUIRE(m.gain / pow_uint(ps, 20) == Approx(expected_ratio).epsilon(1e-9));
        REQUIRE(*m.qber <= 1.05 * det.cv_click / 20.0);
    }
    SECTION("zero gain reports undefined qber") {
        const AttackMetrics m = metrics({0.0}, Strategy::usd(), {5, 3, 0.5, 0.8});
        REQUIRE(m.gain == 0.0);
        REQUIRE_FALSE(m.qber.has_value());
        REQUIRE(m.dc == 0.0);
    }
    SECTION("gain strictly increases with mu_beta") {
        // up to mu_beta = 30: beyond, s and t saturate to 1.0 in double
        double prev = -1.0;
        for (double mu : log_grid(1e-4, 30.0, 60)) {
            const AttackMetrics m = metrics(kSrc016, Strategy::usd(), {5, 3, 0.5, mu});
            REQUIRE(m.gain > prev);
            prev = m.gain;
        }
    }
    SECTION("double clicks never exceed the gain; qber stays in [0,1]") {
        for (double mu_b : {0.1, 1.0, 10.0}) {
            for (double q : {0.0, 0.3, 1.0}) {
                for (int M : {3, 5, 8}) {
                    const AttackMetrics m =
                        metrics(kSrc016, Strategy::usd(), {M, M / 2 + 1, q, mu_b});
                    REQUIRE(m.dc <= m.gain + 1e-15);
                    if (m.gain > 0.0) {
                        REQUIRE(*m.qber >= 0.0);
                        REQUIRE(*m.qber <= 1.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("max_gain_point endpoints") {
    REQUIRE(max_gain_point(0.0).gain == 0.0);
    const AttackMetrics m = max_gain_point(1.0);
    REQUIRE(m.gain == Approx(1.0).epsilon(1e-15));
    REQUIRE(*m.qber == Approx(0.0).margin(1e-15));
    REQUIRE(m.dc == Approx(0.0).margin(1e-15));
    REQUIRE_THROWS_AS(max_gain_point(1.5), std::domain_error);
}

TEST_CASE("closed forms agree with exact enumeration on a mini sweep") {
    // the full sweep runs in the acceptance suite; this is the fast guard
    for (double mu_a : {0.16, 0.2}) {
        const SourceParams src{mu_a};
        const BasisCoeffs c = basis_coeffs(src);
        const Strategy strategies[] = {Strategy::usd(), Strategy::bob_device(),
                                       Strategy::med(c.b / c.a),
                                       Strategy::med((c.b / c.a + 1.0) / 2.0),
                                       Strategy::med(1.0)};
        for (const Strategy& strat : strategies) {
            for (const BlockPolicy pol :
                 {BlockPolicy{3, 2, 0.3, 1.0}, BlockPolicy{5, 3, 0.5, 0.8},
                  BlockPolicy{6, 4, 1.0, 10.0}, BlockPolicy{8, 7, 0.0, 0.1}}) {
                const AttackMetrics a = metrics(src, strat, pol);
                const AttackMetrics e = enumerate_exact(src, strat, pol).metrics;
                REQUIRE(rel_diff(a.gain, e.gain) <= 1e-9);
                REQUIRE(rel_diff(a.dc, e.dc) <= 1e-9);
                REQUIRE(a.qber.has_value() == e.qber.has_value());
                if (a.qber) REQUIRE(rel_diff(*a.qber, *e.qber) <= 1e-9);
            }
        }
    }
}
