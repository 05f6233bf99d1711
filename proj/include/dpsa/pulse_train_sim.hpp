#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "dpsa/block_analytics.hpp"
#include "dpsa/rng.hpp"
#include "dpsa/signal_model.hpp"

namespace dpsa {

enum class PulseKind { Vacuum, Coherent };

// phase_correct: whether Eve's assigned phase matches Alice's actual phase.
// Never consulted for vacuum pulses. Bob's statistics depend only on the
// XOR of adjacent correctness bits, so one bit per pulse is sufficient.
struct Pulse {
    PulseKind kind = PulseKind::Vacuum;
    bool phase_correct = true;
};

enum class PairClass { VV, CV, VC, CC };

inline PairClass classify_pair(PulseKind prev, PulseKind cur) {
    const bool p = prev == PulseKind::Coherent;
    const bool c = cur == PulseKind::Coherent;
    if (p && c) return PairClass::CC;
    if (p) return PairClass::CV;
    if (c) return PairClass::VC;
    return PairClass::VV;
}

struct PairExpectation {
    double clicks = 0.0;
    double errors = 0.0;
    double double_clicks = 0.0;
};

// Expected clicks/errors/double clicks of one interferometer slot.
// cc_error is the strategy-dependent error probability of an aligned-source
// coherent pair (zero unless Eve can misidentify pulses).
inline PairExpectation pair_expectations(PairClass cls, double cc_error,
                                         const DetectionProbs& det) {
    switch (cls) {
        case PairClass::CC: return {det.cc_click, cc_error, 0.0};
        case PairClass::CV:
        case PairClass::VC: return {det.cv_click, det.cv_click / 2.0, det.cv_double};
        case PairClass::VV: return {0.0, 0.0, 0.0};
    }
    return {};
}

struct RunSpan {
    int start = 0;
    int len = 0;
};

// Longest run of consecutive successes (first one on equal length; ties can
// only happen below min_run, where they are irrelevant).
inline RunSpan find_longest_run(const std::vector<bool>& outcomes) {
    RunSpan best;
    const int n = static_cast<int>(outcomes.size());
    int i = 0;
    while (i < n) {
        if (!outcomes[static_cast<size_t>(i)]) {
            ++i;
            continue;
        }
        int j = i;
        while (j < n && outcomes[static_cast<size_t>(j)]) ++j;
        if (j - i > best.len) best = {i, j - i};
        i = j;
    }
    return best;
}

// Eve's dispatch rule for one block of measurement outcomes. The policy
// invariant min_run >= floor(block_len/2 + 1) means at most one run can
// qualify; a second qualifying run would be a corrupted-state bug.
inline std::vector<PulseKind> dispatch_block(const std::vector<bool>& outcomes,
                                             const BlockPolicy& pol,
                                             bool send_at_threshold) {
    validate_policy(pol);
    if (static_cast<int>(outcomes.size()) != pol.block_len)
        throw std::invalid_argument("outcomes length must equal block_len");
    const RunSpan run = find_longest_run(outcomes);

    std::vector<PulseKind> pulses(outcomes.size(), PulseKind::Vacuum);
    const bool send = run.len > pol.min_run || (run.len == pol.min_run && send_at_threshold);
    if (!send) return pulses;

    for (int i = run.start; i < run.start + run.len; ++i)
        pulses[static_cast<size_t>(i)] = PulseKind::Coherent;

    // sanity: the policy invariant forbids a second qualifying run
    int qualifying = 0;
    for (int i = 0; i < pol.block_len;) {
        if (!outcomes[static_cast<size_t>(i)]) {
            ++i;
            continue;
        }
        int j = i;
        while (j < pol.block_len && outcomes[static_cast<size_t>(j)]) ++j;
        if (j - i >= pol.min_run) ++qualifying;
        i = j;
    }
    if (qualifying > 1)
        throw std::logic_error("two disjoint qualifying runs; policy invariant violated");
    return pulses;
}

struct EnumerationResult {
    AttackMetrics metrics;
    double boundary_p = 0.0;  // P(last pulse of a block is coherent), from the enumeration itself
    double clicks_per_block = 0.0;
    double errors_per_block = 0.0;
    double dclicks_per_block = 0.0;
};

// Exact expectation over all 2^M success patterns (with the threshold
// branch expanded), walking every interferometer slot with per-pair physics.
// Independent of the closed forms in block_analytics; the two agreeing is
// the headline correctness property of this project.
inline EnumerationResult enumerate_exact(const SourceParams& src, const Strategy& strat,
                                         const BlockPolicy& pol) {
    validate_source(src);
    validate_policy(pol);
    if (pol.block_len > 12)
        throw std::invalid_argument(
            "block_len > 12: exact enumeration is infeasible, use simulate_chain");

    const PerSignalModel model = per_signal_model(src, strat);
    const DetectionProbs det = detection_probs(pol.mu_beta);
    const double cc_error = pair_error_prob(model, det);
    const int len = pol.block_len;
    const std::uint32_t n_patterns = 1u << len;

    struct Branch {
        double weight;
        std::uint32_t coherent_mask;
    };
    std::vector<Branch> branches;
    branches.reserve(n_patterns);
    std::vector<bool> outcomes(static_cast<size_t>(len));

    double boundary = 0.0;
    for (std::uint32_t pat = 0; pat < n_patterns; ++pat) {
        const int succ = __builtin_popcount(pat);
        const double prob = pow_uint(model.p_succ, static_cast<unsigned>(succ)) *
                            pow_uint(1.0 - model.p_succ, static_cast<unsigned>(len - succ));
        if (prob == 0.0) continue;
        for (int i = 0; i < len; ++i) outcomes[static_cast<size_t>(i)] = (pat >> i) & 1u;
        const RunSpan run = find_longest_run(outcomes);

        auto emit = [&](double w, bool send) {
            if (w == 0.0) return;
            std::uint32_t mask = 0;
            if (send) {
                const auto pulses = dispatch_block(outcomes, pol, true);
                for (int i = 0; i < len; ++i)
                    if (pulses[static_cast<size_t>(i)] == PulseKind::Coherent)
                        mask |= 1u << i;
            }
            branches.push_back({w, mask});
            if (mask >> (len - 1)) boundary += w;
        };
        if (run.len < pol.min_run) {
            emit(prob, false);
        } else if (run.len == pol.min_run) {
            emit(prob * pol.send_prob, true);
            emit(prob * (1.0 - pol.send_prob), false);
        } else {
            emit(prob, true);
        }
    }

    double clicks = 0.0, errors = 0.0, dclicks = 0.0;
    for (const Branch& br : branches) {
        for (const auto& [prev_coherent, bw] :
             {std::pair<bool, double>{true, boundary}, {false, 1.0 - boundary}}) {
            const double w = br.weight * bw;
            if (w == 0.0) continue;
            bool prev = prev_coherent;
            for (int i = 0; i < len; ++i) {
                const bool cur = (br.coherent_mask >> i) & 1u;
                const PairClass cls =
                    classify_pair(prev ? PulseKind::Coherent : PulseKind::Vacuum,
                                  cur ? PulseKind::Coherent : PulseKind::Vacuum);
                const PairExpectation pe = pair_expectations(cls, cc_error, det);
                clicks += w * pe.clicks;
                errors += w * pe.errors;
                dclicks += w * pe.double_clicks;
                prev = cur;
            }
        }
    }

    EnumerationResult res;
    res.boundary_p = boundary;
    res.clicks_per_block = clicks;
    res.errors_per_block = errors;
    res.dclicks_per_block = dclicks;
    res.metrics.gain = clicks / len;
    res.metrics.dc = dclicks / len;
    if (res.metrics.gain > 0.0) res.metrics.qber = errors / clicks;
    return res;
}

// One estimated rate from the chain simulation.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long long n_blocks = 0;
    std::uint64_t seed = 0;
};

// Per-class slot diagnostics, useful for validating the sampling model.
struct SlotTally {
    std::uint64_t cc_slots = 0;
    std::uint64_t cc_misaligned = 0;
    std::uint64_t cc_clicks = 0;
    std::uint64_t cc_errors = 0;
    std::uint64_t cv_slots = 0;
    std::uint64_t cv_clicks = 0;
    std::uint64_t cv_errors = 0;
    std::uint64_t cv_double_clicks = 0;
};

struct ChainEstimates {
    McEstimate gain;
    std::optional<McEstimate> qber;  // empty when no clicks were observed
    McEstimate dc;
    SlotTally tally;
};

namespace detail {

struct BlockCounts {
    int clicks = 0;
    int errors = 0;
    int dclicks = 0;
};

struct ChainSums {
    std::uint64_t n = 0;
    std::uint64_t c = 0, e = 0, d = 0;
    std::uint64_t c2 = 0, e2 = 0, d2 = 0, ec = 0;
    SlotTally tally;

    void add(const BlockCounts& b) {
        ++n;
        c += static_cast<std::uint64_t>(b.clicks);
        e += static_cast<std::uint64_t>(b.errors);
        d += static_cast<std::uint64_t>(b.dclicks);
        c2 += static_cast<std::uint64_t>(b.clicks) * b.clicks;
        e2 += static_cast<std::uint64_t>(b.errors) * b.errors;
        d2 += static_cast<std::uint64_t>(b.dclicks) * b.dclicks;
        ec += static_cast<std::uint64_t>(b.errors) * b.clicks;
    }
    void merge(const ChainSums& o) {
        n += o.n;
        c += o.c; e += o.e; d += o.d;
        c2 += o.c2; e2 += o.e2; d2 += o.d2; ec += o.ec;
        tally.cc_slots += o.tally.cc_slots;
        tally.cc_misaligned += o.tally.cc_misaligned;
        tally.cc_clicks += o.tally.cc_clicks;
        tally.cc_errors += o.tally.cc_errors;
        tally.cv_slots += o.tally.cv_slots;
        tally.cv_clicks += o.tally.cv_clicks;
        tally.cv_errors += o.tally.cv_errors;
        tally.cv_double_clicks += o.tally.cv_double_clicks;
    }
};

// Draw order per block is part of the reproducibility contract:
// success flags, then the threshold branch (only when the run length equals
// min_run), then one correctness bit per coherent pulse (Med only).
inline void dispatch_with_stream(SplitMix64& g, const BlockPolicy& pol,
                                 const PerSignalModel& model, bool draw_correctness,
                                 std::vector<bool>& outcomes, std::vector<Pulse>& pulses) {
    const int len = pol.block_len;
    for (int i = 0; i < len; ++i)
        outcomes[static_cast<size_t>(i)] = g.next_u01() < model.p_succ;
    const RunSpan run = find_longest_run(outcomes);
    bool send = false;
    if (run.len > pol.min_run) {
        send = true;
    } else if (run.len == pol.min_run) {
        send = g.next_u01() < pol.send_prob;
    }
    for (int i = 0; i < len; ++i) {
        Pulse& p = pulses[static_cast<size_t>(i)];
        p.kind = PulseKind::Vacuum;
        p.phase_correct = true;
        if (send && i >= run.start && i < run.start + run.len) {
            p.kind = PulseKind::Coherent;
            if (draw_correctness) p.phase_correct = g.next_u01() >= model.p_err;
        }
    }
}

// Slot sampling. Coherent/coherent: the full intensity interferes onto one
// detector, click w.p. s, at the wrong detector iff the pair is misaligned.
// Coherent/vacuum: each detector sees a quarter of the intensity and fires
// independently; a lone click carries no key information (wrong detector
// w.p. 1/2) and a double click forces a random bit.
inline BlockCounts sample_block(SplitMix64& g, const std::vector<Pulse>& pulses,
                                Pulse prev, const DetectionProbs& det, double one_arm,
                                SlotTally& tally) {
    BlockCounts counts;
    for (const Pulse& cur : pulses) {
        switch (classify_pair(prev.kind, cur.kind)) {
            case PairClass::CC: {
                ++tally.cc_slots;
                const bool aligned = prev.phase_correct == cur.phase_correct;
                if (!aligned) ++tally.cc_misaligned;
                if (g.next_u01() < det.cc_click) {
                    ++counts.clicks;
                    ++tally.cc_clicks;
                    if (!aligned) {
                        ++counts.errors;
                        ++tally.cc_errors;
                    }
                }
                break;
            }
            case PairClass::CV:
            case PairClass::VC: {
                ++tally.cv_slots;
                const bool det0 = g.next_u01() < one_arm;
                const bool det1 = g.next_u01() < one_arm;
                if (det0 && det1) {
                    ++counts.clicks;
                    ++counts.dclicks;
                    ++tally.cv_clicks;
                    ++tally.cv_double_clicks;
                    if (g.next_u01() < 0.5) {
                        ++counts.errors;
                        ++tally.cv_errors;
                    }
                } else if (det0 || det1) {
                    ++counts.clicks;
                    ++tally.cv_clicks;
                    if (g.next_u01() < 0.5) {
                        ++counts.errors;
                        ++tally.cv_errors;
                    }
                }
                break;
            }
            case PairClass::VV:
                break;
        }
        prev = cur;
    }
    return counts;
}

}  // namespace detail

// Simulates n_blocks consecutive blocks through Eve's dispatch rule and
// Bob's interferometer. One extra leading block is simulated and discarded
// so every counted block sees the stationary boundary distribution.
//
// Reproducibility: blocks draw from substreams keyed by (seed, segment,
// block); segments are a fixed 4096 blocks regardless of worker count;
// boundary slots belong to the later block and a segment recomputes its
// predecessor's final pulse from that block's dispatch draws. All
// accumulators are integers, so worker scheduling cannot change the result.
inline ChainEstimates simulate_chain(const SourceParams& src, const Strategy& strat,
                                     const BlockPolicy& pol, long long n_blocks,
                                     std::uint64_t seed, int workers = 1) {
    validate_source(src);
    validate_policy(pol);
    if (n_blocks < 1) throw std::invalid_argument("n_blocks must be >= 1");
    if (workers < 1) workers = 1;

    const PerSignalModel model = per_signal_model(src, strat);
    const DetectionProbs det = detection_probs(pol.mu_beta);
    const double one_arm = -std::expm1(-pol.mu_beta / 4.0);
    const bool draw_correctness = strat.kind == StrategyKind::Med;

    const std::uint64_t total_blocks = static_cast<std::uint64_t>(n_blocks) + 1;
    const std::uint64_t n_segments =
        (total_blocks + kBlocksPerSegment - 1) / kBlocksPerSegment;

    detail::ChainSums sums;
    std::mutex merge_mutex;
    std::atomic<std::uint64_t> next_segment{0};

    auto work = [&]() {
        detail::ChainSums local;
        std::vector<bool> outcomes(static_cast<size_t>(pol.block_len));
        std::vector<Pulse> pulses(static_cast<size_t>(pol.block_len));
        std::vector<Pulse> replay(static_cast<size_t>(pol.block_len));
        for (;;) {
            const std::uint64_t seg = next_segment.fetch_add(1);
            if (seg >= n_segments) break;
            const std::uint64_t lo = seg * kBlocksPerSegment;
            const std::uint64_t hi = std::min(lo + kBlocksPerSegment, total_blocks);
            Pulse prev{PulseKind::Vacuum, true};
            if (lo > 0) {
                SplitMix64 g = block_stream(seed, lo - 1);
                detail::dispatch_with_stream(g, pol, model, draw_correctness, outcomes,
                                             replay);
                prev = replay.back();
            }
            for (std::uint64_t b = lo; b < hi; ++b) {
                SplitMix64 g = block_stream(seed, b);
                detail::dispatch_with_stream(g, pol, model, draw_correctness, outcomes,
                                             pulses);
                if (b > 0)
                    local.add(detail::sample_block(g, pulses, prev, det, one_arm,
                                                   local.tally));
                prev = pulses.back();
            }
        }
        std::lock_guard<std::mutex> lock(merge_mutex);
        sums.merge(local);
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    const double n = static_cast<double>(sums.n);
    const double len = pol.block_len;
    auto rate_estimate = [&](std::uint64_t sum, std::uint64_t sum_sq) {
        McEstimate est;
        est.n_blocks = static_cast<long long>(sums.n);
        est.seed = seed;
        est.mean = static_cast<double>(sum) / (n * len);
        if (sums.n > 1) {
            const double var =
                (static_cast<double>(sum_sq) - static_cast<double>(sum) / n * static_cast<double>(sum)) /
                (n - 1.0);
            est.std_error = std::sqrt(std::max(var, 0.0) / n) / len;
        }
        return est;
    };

    ChainEstimates out;
    out.gain = rate_estimate(sums.c, sums.c2);
    out.dc = rate_estimate(sums.d, sums.d2);
    if (sums.c > 0) {
        McEstimate q;
        q.n_blocks = static_cast<long long>(sums.n);
        q.seed = seed;
        const double sc = static_cast<double>(sums.c);
        q.mean = static_cast<double>(sums.e) / sc;
        // linearized ratio-estimator variance from per-block residuals
        const double ssr = static_cast<double>(sums.e2) -
                           2.0 * q.mean * static_cast<double>(sums.ec) +
                           q.mean * q.mean * static_cast<double>(sums.c2);
        if (sums.n > 1) q.std_error = std::sqrt(std::max(ssr, 0.0) * n / (n - 1.0)) / sc;
        out.qber = q;
    }
    out.tally = sums.tally;
    return out;
}

}  // namespace dpsa
