#ifndef RSTPARSE_RANDOM_HPP
#define RSTPARSE_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace rstparse
{
  // mt19937_64 with distribution code of our own, so that sequences are
  // identical across standard library implementations.
  class Rng
  {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n).
    std::uint64_t index(std::uint64_t n)
    {
      const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
      std::uint64_t x;
      do x = engine_(); while (x >= limit);
      return x % n;
    }

    int uniform_int(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::uint64_t>(hi - lo + 1))); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, no cached second value.
    double normal(double mean = 0.0, double stddev = 1.0)
    {
      double u1 = uniform();
      while (u1 <= 0.0) u1 = uniform();
      const double u2 = uniform();
      return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& items)
    {
      for (std::size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[index(i)]);
    }

  private:
    std::mt19937_64 engine_;
  };
}

#endif
