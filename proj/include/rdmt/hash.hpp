#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rdmt {

// 64-bit FNV-1a. Stable across platforms; used for split hashing and
// content digests (staleness detection, not security).
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seeded, avalanched string hash; the basis for patient-level splits and
// per-patient generator seeds.
inline std::uint64_t seeded_hash(std::string_view s, std::uint64_t seed) {
  return splitmix64(fnv1a64(s) ^ splitmix64(seed));
}

std::string hex64(std::uint64_t v);

// FNV-1a digest of a file's bytes, as 16 hex chars. Throws std::runtime_error
// if the file cannot be read.
std::string file_digest(const std::string& path);

// Minimal deterministic RNG used everywhere randomness is needed.
// mt19937_64 is avoided so sequences do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Rejection-free modulo is fine here: n is tiny next
  // to 2^64 so the bias is unobservable.
  std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  template <typename T>
  void shuffle(T& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace rdmt
