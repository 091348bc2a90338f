#ifndef DCDM_RNG_HPP
#define DCDM_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace dcdm {

// All randomness in the project flows from one 64-bit seed through named
// substreams: substream_seed("lanczos/q0", seed) etc. Substreams decouple
// consumers so adding draws in one place never perturbs another.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view purpose) {
    return splitmix64(seed ^ fnv1a(purpose));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::string_view purpose) {
    return std::mt19937_64(substream_seed(seed, purpose));
}

} // namespace dcdm

#endif
