#include "chirpsound/rng.hpp"

#include <cmath>
#include <numbers>

namespace chirpsound {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

}  // namespace

Philox4x32::Block Philox4x32::generate(Block ctr, Key key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t trial, std::uint32_t stream_id)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      trial_(static_cast<std::uint32_t>(trial)),
      stream_(stream_id ^ static_cast<std::uint32_t>(trial >> 32))
{
}

std::uint32_t RandomStream::next_u32()
{
    if (used_ == 4) {
        buffer_ = Philox4x32::generate(
            {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), trial_, stream_},
            key_);
        ++block_;
        used_ = 0;
    }
    return buffer_[used_++];
}

std::uint64_t RandomStream::next_u64()
{
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double RandomStream::uniform()
{
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

int RandomStream::uniform_int(int lo, int hi)
{
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int>(lo + static_cast<std::int64_t>(x % span));
}

double RandomStream::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::complex<double> RandomStream::complex_normal(double sigma2)
{
    const double scale = std::sqrt(sigma2);
    const double re = normal();
    const double im = normal();
    return {scale * re, scale * im};
}

}  // namespace chirpsound
