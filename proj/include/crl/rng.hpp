#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace crl {

// Deterministic random source. std::mt19937_64 output is fully specified by
// the standard; the draw helpers below avoid std::*_distribution, whose
// sequences are implementation-defined, so identical seeds give identical
// streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n). Rejection sampling, no modulo bias.
  std::size_t next_below(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % n);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_real() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    while (u == 0.0) u = next_real();
    const double v = next_real();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 2.0 * 3.14159265358979323846 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates with the deterministic index draw above.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[next_below(i)]);
    }
  }

  // Serializes the engine only; a cached Box-Muller spare is dropped, so
  // restore(save(x)) followed by save() is byte-identical.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void restore_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    have_spare_ = false;
    spare_ = 0.0;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace crl
