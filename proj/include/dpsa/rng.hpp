#pragma once

#include <cstdint>

namespace dpsa {

// splitmix64 (Steele, Lea, Flood). One multiply-xorshift chain per draw;
// used both as the stream generator and as the avalanche for deriving
// sub-stream seeds.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Fixed segmentation of the block chain. Segment size is a constant of the
// format: results must not depend on how segments are assigned to workers.
inline constexpr std::uint64_t kBlocksPerSegment = 4096;

// Seed hierarchy: master -> segment -> block-within-segment. Any block's
// stream is addressable without replaying its predecessors, which is what
// makes the segment handover cheap and worker-count independent.
inline std::uint64_t segment_seed(std::uint64_t master, std::uint64_t segment) {
    return mix64(master + (segment + 1) * 0x9E3779B97F4A7C15ull);
}

inline SplitMix64 block_stream(std::uint64_t master, std::uint64_t block_index) {
    const std::uint64_t seg = block_index / kBlocksPerSegment;
    const std::uint64_t off = block_index % kBlocksPerSegment;
    return SplitMix64(mix64(segment_seed(master, seg) + (off + 1) * 0xD1B54A32D192ED03ull));
}

}  // namespace dpsa
