#pragma once
// One seeded generator per run; every stochastic consumer draws from it (or
// from a derived child) so runs replay bit-exactly from a seed.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ednas {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t raw() { return eng_(); }
  double uniform();                      // [0, 1)
  double uniform(double a, double b);
  double normal(double mean = 0.0, double stddev = 1.0);
  int uniform_int(int n);                // [0, n)
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(i + 1))]);
  }

  // Independent stream derived from this rng's seed and a tag; insensitive
  // to how much the parent has already consumed.
  Rng child(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::string save_state() const;
  void load_state(const std::string& s);

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ednas
