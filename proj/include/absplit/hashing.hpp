#pragma once

#include <cstdint>
#include <string_view>

namespace absplit {

// Stable keyed 64-bit hash used for every randomized decision.
//
// Definition (fixed; changing it changes every stored assignment):
//   h = FNV-1a-64 over  namespace || 0x1F || seed as 8 little-endian bytes || 0x1F || id
//   result = fmix64(h)   (MurmurHash3 64-bit finalizer)
//
// Binary decisions use the most significant bit of the result.
std::uint64_t stable_hash(std::string_view ns, std::uint64_t seed, std::string_view id);

std::uint64_t fmix64(std::uint64_t x);

inline bool hash_bit(std::uint64_t h) { return (h >> 63) != 0; }

// Uniform double in [0, 1) from the top 53 bits.
inline double hash_unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Derives an independent seed for a sub-stream (replication, entity, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::string_view id);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index);

}  // namespace absplit
