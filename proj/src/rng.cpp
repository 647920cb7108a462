#include "lccnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace lccnet {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> c, std::uint32_t k0, std::uint32_t k1) {
    for (int r = 0; r < 10; ++r) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return c;
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint32_t stream, std::uint64_t step)
    : seed_(seed), stream_(stream), step_(step) {}

void Rng::set_step(std::uint64_t step) {
    step_ = step;
    block_ = 0;
    pos_ = 4;
    has_spare_ = false;
}

void Rng::refill() {
    const std::array<std::uint32_t, 4> ctr = {block_++, static_cast<std::uint32_t>(step_),
                                              static_cast<std::uint32_t>(step_ >> 32), stream_};
    buf_ = philox(ctr, static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32));
    pos_ = 0;
}

Rng::result_type Rng::operator()() {
    if (pos_ > 2) refill();
    const std::uint64_t hi = buf_[pos_];
    const std::uint64_t lo = buf_[pos_ + 1];
    pos_ += 2;
    return (hi << 32) | lo;
}

double Rng::uniform() {
    // 53 random bits, shifted off zero
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

double Rng::exponential() { return -std::log(uniform()); }

int Rng::sign() { return ((*this)() >> 63) ? 1 : -1; }

std::uint64_t Rng::below(std::uint64_t n) {
    // rejection removes modulo bias
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
        x = (*this)();
    } while (x >= limit);
    return x % n;
}

}  // namespace lccnet
