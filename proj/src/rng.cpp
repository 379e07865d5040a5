#include "hybridsde/rng.hpp"

namespace hsde {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 RngStream::engine(Channel channel) const noexcept {
    std::uint64_t h = splitmix64(seed_);
    h = splitmix64(h ^ stream_id_);
    h = splitmix64(h ^ static_cast<std::uint64_t>(channel));
    return std::mt19937_64(h);
}

}  // namespace hsde
