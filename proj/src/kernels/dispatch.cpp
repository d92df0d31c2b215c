#include "ednas/kernels.hpp"

#include <cstdlib>

namespace ednas::kernels {

#if defined(EDNAS_HAVE_AVX2)
const Kernels& avx2();
#endif
#if defined(EDNAS_HAVE_NEON)
const Kernels& neon();
#endif

namespace {

bool avx2_usable() {
#if defined(EDNAS_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* lookup(std::string_view name) {
  if (name == "scalar") return &scalar();
#if defined(EDNAS_HAVE_AVX2)
  if (name == "avx2" && avx2_usable()) return &avx2();
#endif
#if defined(EDNAS_HAVE_NEON)
  if (name == "neon") return &neon();
#endif
  return nullptr;
}

const Kernels* pick_default() {
  if (const char* env = std::getenv("EDNAS_KERNELS")) {
    if (const Kernels* k = lookup(env)) return k;
  }
#if defined(EDNAS_HAVE_AVX2)
  if (avx2_usable()) return &avx2();
#endif
#if defined(EDNAS_HAVE_NEON)
  return &neon();
#endif
  return &scalar();
}

const Kernels*& active_slot() {
  static const Kernels* k = pick_default();
  return k;
}

}  // namespace

const Kernels& active() { return *active_slot(); }

bool select(std::string_view name) {
  if (const Kernels* k = lookup(name)) {
    active_slot() = k;
    return true;
  }
  return false;
}

std::string_view active_name() { return active().name; }

std::vector<std::string_view> available() {
  std::vector<std::string_view> out{"scalar"};
#if defined(EDNAS_HAVE_AVX2)
  if (avx2_usable()) out.push_back("avx2");
#endif
#if defined(EDNAS_HAVE_NEON)
  out.push_back("neon");
#endif
  return out;
}

}  // namespace ednas::kernels
