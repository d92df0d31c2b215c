#include "ednas/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ednas {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

double Rng::uniform() {
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::normal(double mean, double stddev) {
  // Box-Muller without retained state so the stream replays exactly.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int requires n > 0");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t r;
  do {
    r = eng_();
  } while (r >= limit);
  return static_cast<int>(r % un);
}

Rng Rng::child(std::uint64_t tag) const {
  return Rng(splitmix64(seed_ ^ splitmix64(tag)));
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << seed_ << ' ' << eng_;
  return os.str();
}

void Rng::load_state(const std::string& s) {
  std::istringstream is(s);
  is >> seed_ >> eng_;
  if (!is) throw std::runtime_error("bad rng state string");
}

}  // namespace ednas
