#pragma once

// Deterministic child-seed derivation so modules never share a raw rng.
// Construction: FNV-1a (64-bit) over the master seed's 8 little-endian bytes,
// then for each label a 0xFF separator byte followed by the label bytes,
// finalized with the splitmix64 mixer. Label order matters.

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace uawnsim {

namespace detail {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a_byte(std::uint64_t h, unsigned char b) {
    return (h ^ static_cast<std::uint64_t>(b)) * kFnvPrime;
}

inline std::uint64_t fnv1a_bytes(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h = fnv1a_byte(h, p[i]);
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t seed_stream(std::uint64_t master, std::initializer_list<std::string_view> labels) {
    std::uint64_t h = detail::kFnvOffset;
    unsigned char m[8];
    for (int i = 0; i < 8; ++i) m[i] = static_cast<unsigned char>((master >> (8 * i)) & 0xFF);
    h = detail::fnv1a_bytes(h, m, 8);
    for (std::string_view label : labels) {
        h = detail::fnv1a_byte(h, 0xFF);
        h = detail::fnv1a_bytes(h, label.data(), label.size());
    }
    return detail::splitmix64(h);
}

inline std::uint64_t seed_stream(std::uint64_t master, std::string_view a) {
    return seed_stream(master, {a});
}
inline std::uint64_t seed_stream(std::uint64_t master, std::string_view a, std::string_view b) {
    return seed_stream(master, {a, b});
}
inline std::uint64_t seed_stream(std::uint64_t master, std::string_view a, long index) {
    return seed_stream(master, {a, std::to_string(index)});
}

/// FNV-1a over a whole buffer, for config hashing.
inline std::uint64_t fnv1a_hash(std::string_view bytes) {
    return detail::fnv1a_bytes(detail::kFnvOffset, bytes.data(), bytes.size());
}

}  // namespace uawnsim
