#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dcoh {

/// Malformed or inconsistent input data (bad files, schema violations,
/// insufficient sampling pools). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical preconditions (rank deficiency,
/// divergence). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent sub-seed from a parent seed and a label, e.g.
/// derive_seed(seed, "dialogue:sw2005"). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

/// Seeded generator over std::mt19937_64. The engine's output sequence is
/// fixed by the standard; the distribution helpers below are implemented
/// here (not via <random> distributions) so that sampled values are also
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n) without replacement, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::mt19937_64 engine_;
};

/// Reads a whole file; throws DataError when it cannot be opened.
std::string read_file(const std::string& path);

/// Writes bytes, creating or truncating the file.
void write_file(const std::string& path, std::string_view bytes);

/// Splits on newlines, dropping a trailing empty line and '\r'.
std::vector<std::string> split_lines(std::string_view text);

/// Hex string of a 64-bit value (16 lowercase digits).
std::string hex64(std::uint64_t v);

/// ASCII lowercase.
std::string lowercase(std::string s);

}  // namespace dcoh
