#pragma once

#include <cstdint>
#include <random>

namespace hsde {

/// Independent sources of randomness consumed by one simulated path. Keeping
/// them on separate engines means e.g. bridge-crossing draws never shift the
/// Brownian increments, so paired comparisons stay paired.
enum class Channel : std::uint64_t {
    clock = 1,     // Poisson(gamma) epochs
    jump = 2,      // U_l driving the jump choice
    brownian = 3,  // Gaussian increments
    kill = 4,      // e_q
    bridge = 5,    // Brownian-bridge crossing tests
    coupling = 6,  // residual draws of the approximate chain after decoupling
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// (seed, stream_id) identifies one reproducible family of engines; one
/// stream is assigned per path.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    std::mt19937_64 engine(Channel channel) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

}  // namespace hsde
