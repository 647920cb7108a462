#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace lccnet {

/**
 * Counter-based generator (Philox4x32-10) keyed by a 64-bit seed.
 *
 * The 128-bit counter is laid out as {block, step_lo, step_hi, stream}, so a
 * draw is a pure function of (seed, stream, step, position within step).
 * Chains built on it are reproducible regardless of how they are scheduled.
 */
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0, std::uint32_t stream = 0, std::uint64_t step = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();

    /// Jump to the start of `step`; discards any buffered output.
    void set_step(std::uint64_t step);
    /// Fresh generator for the same (seed, stream) positioned at `step`.
    Rng at_step(std::uint64_t step) const { return Rng(seed_, stream_, step); }
    /// Fresh generator for a derived stream, step 0.
    Rng substream(std::uint32_t stream) const { return Rng(seed_, stream, 0); }

    std::uint64_t seed() const { return seed_; }
    std::uint32_t stream() const { return stream_; }
    std::uint64_t step() const { return step_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double exponential();
    /// +1 or -1 with equal probability.
    int sign();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    void refill();

    std::uint64_t seed_;
    std::uint32_t stream_;
    std::uint64_t step_;
    std::uint32_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lccnet
