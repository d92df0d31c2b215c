#pragma once
// Minimal arbitrary-precision natural number; just enough for exact search
// space counts (repeated doubling and decimal printing).

#include <cstdint>
#include <string>
#include <vector>

namespace ednas {

class BigNat {
 public:
  static BigNat one();
  static BigNat from_u64(std::uint64_t v);
  static BigNat pow2(int k);  // 2^k, k >= 0

  void mul2();
  std::string str() const;  // decimal

  bool operator==(const BigNat&) const = default;

 private:
  // base 1e9 limbs, little-endian
  std::vector<std::uint32_t> limbs_{0};
};

}  // namespace ednas
