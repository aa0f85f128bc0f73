#include "absplit/hashing.hpp"

#include <string>

namespace absplit {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr unsigned char kSeparator = 0x1F;

inline std::uint64_t fnv_byte(std::uint64_t h, unsigned char b) { return (h ^ b) * kFnvPrime; }

std::uint64_t fnv_bytes(std::uint64_t h, std::string_view s) {
  for (char c : s) h = fnv_byte(h, static_cast<unsigned char>(c));
  return h;
}

}  // namespace

std::uint64_t fmix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

std::uint64_t stable_hash(std::string_view ns, std::uint64_t seed, std::string_view id) {
  std::uint64_t h = fnv_bytes(kFnvOffset, ns);
  h = fnv_byte(h, kSeparator);
  for (int i = 0; i < 8; ++i) h = fnv_byte(h, static_cast<unsigned char>((seed >> (8 * i)) & 0xFF));
  h = fnv_byte(h, kSeparator);
  h = fnv_bytes(h, id);
  return fmix64(h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::string_view id) {
  return stable_hash(stream, seed, id);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index) {
  return stable_hash(stream, seed, std::to_string(index));
}

}  // namespace absplit
