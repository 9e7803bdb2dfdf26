#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace chirpsound {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is addressed by (seed, trial, stream_id). The 128-bit counter is
// laid out as [block_lo, block_hi, trial, stream_id] and the 64-bit key is the
// seed, so every (trial, stream_id) pair is an independent, reproducible
// substream. Monte-Carlo trials can therefore run in any order or in parallel
// without changing their draws.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key);
};

// Well-known stream ids, so independent consumers never share draws.
enum class StreamId : std::uint32_t {
    channel_taps = 1,
    fractional_offsets = 2,
    noise = 3,
    capacity_delays = 4,
};

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t trial, std::uint32_t stream_id);
    RandomStream(std::uint64_t seed, std::uint64_t trial, StreamId id)
        : RandomStream(seed, trial, static_cast<std::uint32_t>(id)) {}

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform on (0, 1]; never returns 0 so it is safe under log().
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);

    double normal();
    // Circular complex Gaussian with variance per real dimension sigma2.
    std::complex<double> complex_normal(double sigma2);

private:
    Philox4x32::Key key_;
    std::uint64_t block_ = 0;
    std::uint32_t trial_;
    std::uint32_t stream_;
    Philox4x32::Block buffer_{};
    int used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace chirpsound
