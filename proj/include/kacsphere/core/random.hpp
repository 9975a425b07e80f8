#ifndef KACSPHERE_CORE_RANDOM_HPP
#define KACSPHERE_CORE_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>

#include "error.hpp"

namespace kacsphere {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Identifies an independent random stream: user seed, owning module, replica index.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t module = 0;
  std::uint64_t replica = 0;

  StreamKey() = default;
  StreamKey(std::uint64_t s, std::string_view module_name, std::uint64_t r = 0)
      : seed(s), module(fnv1a64(module_name)), replica(r) {}

  std::uint64_t digest() const {
    return splitmix64(splitmix64(seed) ^ splitmix64(module + 0x632BE59BD9B4E019ULL) ^
                      splitmix64(replica * 0xD1B54A32D192ED03ULL + 1));
  }
};

/// Philox4x32-10 counter based generator. Satisfies UniformRandomBitGenerator.
class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  explicit Philox4x32(std::uint64_t key = 0) { seed(key); }

  void seed(std::uint64_t key) {
    key_ = {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    counter_ = 0;
    index_ = 2;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (index_ >= 2) refill();
    return block_[index_++];
  }

  std::uint64_t key() const { return std::uint64_t(key_[0]) | (std::uint64_t(key_[1]) << 32); }
  std::uint64_t counter() const { return counter_; }
  unsigned index() const { return index_; }

  /// Restore a position previously read through key(), counter() and index().
  void restore(std::uint64_t key, std::uint64_t counter, unsigned index) {
    seed(key);
    if (index > 2) throw ParameterError("invalid generator index");
    if (index < 2) {
      counter_ = counter - 1;
      refill();
    } else {
      counter_ = counter;
    }
    index_ = index;
  }

 private:
  static void round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c[0];
    const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c[2];
    const std::uint32_t hi0 = p0 >> 32, lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = p1 >> 32, lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  void refill() {
    std::array<std::uint32_t, 4> c = {static_cast<std::uint32_t>(counter_),
                                      static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
    std::array<std::uint32_t, 2> k = key_;
    for (int r = 0; r < 10; ++r) {
      round(c, k);
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    block_[0] = std::uint64_t(c[0]) | (std::uint64_t(c[1]) << 32);
    block_[1] = std::uint64_t(c[2]) | (std::uint64_t(c[3]) << 32);
    ++counter_;
    index_ = 0;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> block_{};
  unsigned index_ = 2;
};

/// Variate generation on top of Philox. All transforms are implemented here so that
/// streams are reproducible independent of the standard library.
class Rng {
 public:
  using result_type = Philox4x32::result_type;

  explicit Rng(const StreamKey& key) : engine_(key.digest()) {}
  explicit Rng(std::uint64_t seed) : engine_(StreamKey(seed, "default").digest()) {}

  static constexpr result_type min() { return Philox4x32::min(); }
  static constexpr result_type max() { return Philox4x32::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_pos() { return (double(engine_() >> 11) + 1.0) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double th = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw ParameterError("index range must be positive");
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniformly distributed point on the unit sphere of R^{out.size()}.
  void unit_vector(std::span<double> out) {
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& x : out) {
        x = normal();
        n2 += x * x;
      }
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : out) x *= inv;
  }

  struct State {
    std::uint64_t key, counter;
    unsigned index;
    bool has_spare;
    double spare;
  };
  State state() const { return {engine_.key(), engine_.counter(), engine_.index(), has_spare_, spare_}; }
  void restore(const State& s) {
    engine_.restore(s.key, s.counter, s.index);
    has_spare_ = s.has_spare;
    spare_ = s.spare;
  }

 private:
  Philox4x32 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kacsphere

#endif
