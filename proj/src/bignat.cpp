#include "ednas/bignat.hpp"

#include <stdexcept>

namespace ednas {

namespace {
constexpr std::uint32_t kBase = 1000000000u;
}

BigNat BigNat::one() { return from_u64(1); }

BigNat BigNat::from_u64(std::uint64_t v) {
  BigNat n;
  n.limbs_.clear();
  do {
    n.limbs_.push_back(static_cast<std::uint32_t>(v % kBase));
    v /= kBase;
  } while (v);
  return n;
}

BigNat BigNat::pow2(int k) {
  if (k < 0) throw std::invalid_argument("BigNat::pow2: negative exponent");
  BigNat n = one();
  for (int i = 0; i < k; ++i) n.mul2();
  return n;
}

void BigNat::mul2() {
  std::uint32_t carry = 0;
  for (auto& limb : limbs_) {
    const std::uint64_t doubled = 2ull * limb + carry;
    limb = static_cast<std::uint32_t>(doubled % kBase);
    carry = static_cast<std::uint32_t>(doubled / kBase);
  }
  if (carry) limbs_.push_back(carry);
}

std::string BigNat::str() const {
  std::string s = std::to_string(limbs_.back());
  for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
    std::string part = std::to_string(*it);
    s += std::string(9 - part.size(), '0') + part;
  }
  return s;
}

}  // namespace ednas
