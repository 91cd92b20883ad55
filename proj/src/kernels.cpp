#include "freespace/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "freespace/error.hpp"

namespace freespace::kernels {

namespace {

const KernelTable kScalarTable = {
    &scalar::axpy_kahan, &scalar::sad_u8, &scalar::mul_f32,
    &scalar::dot_f32,    &scalar::sum_f32, "scalar",
};

#if defined(FREESPACE_HAVE_AVX2)
const KernelTable kAvx2Table = {
    &avx2::axpy_kahan, &avx2::sad_u8, &avx2::mul_f32,
    &avx2::dot_f32,    &avx2::sum_f32, "avx2",
};
#endif

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* pick_default() {
  if (const char* env = std::getenv("FREESPACE_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return &kScalarTable;
  }
#if defined(FREESPACE_HAVE_AVX2)
  if (avx2_available()) return &kAvx2Table;
#endif
  return &kScalarTable;
}

}  // namespace

bool avx2_available() {
#if defined(FREESPACE_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& table(Isa isa) {
  if (isa == Isa::kScalar) return kScalarTable;
#if defined(FREESPACE_HAVE_AVX2)
  if (avx2_available()) return kAvx2Table;
#endif
  throw Error("kernels: AVX2 not available on this build/CPU");
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = pick_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

const KernelTable& select(const std::string& name) {
  const KernelTable* t = nullptr;
  if (name == "scalar") {
    t = &kScalarTable;
  } else if (name == "avx2") {
    t = &table(Isa::kAvx2);
  } else if (name == "auto") {
    t = pick_default();
  } else {
    throw Error("kernels: unknown simd selection '" + name + "'");
  }
  g_active.store(t, std::memory_order_release);
  return *t;
}

}  // namespace freespace::kernels
