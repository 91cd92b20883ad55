#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace freespace::kernels {

// Data-parallel inner loops of the pipeline. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2 variant; the active
// table is chosen once at startup from CPUID and can be forced to scalar
// (config / FREESPACE_SIMD=scalar). The AVX2 variants avoid FMA contraction
// so elementwise kernels are bit-identical to the scalar reference;
// reductions may differ in the last ulps from lane reordering.
struct KernelTable {
  // Kahan-compensated y[i] += a * x[i] with persistent compensation c[i].
  void (*axpy_kahan)(double* y, double* c, const double* x, double a,
                     std::size_t n);
  // Sum of absolute differences of two byte rows.
  std::uint32_t (*sad_u8)(const std::uint8_t* a, const std::uint8_t* b,
                          std::size_t n);
  // out[i] = a[i] * b[i].
  void (*mul_f32)(float* out, const float* a, const float* b, std::size_t n);
  // Inner product and plain sum (reductions).
  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  float (*sum_f32)(const float* a, std::size_t n);

  const char* name;
};

enum class Isa { kScalar, kAvx2 };

// Table lookup; kAvx2 throws if unsupported by the build or the CPU.
const KernelTable& table(Isa isa);

// Selected once per process: AVX2 when available unless overridden.
const KernelTable& active();

// Override the process-wide selection (tests, config). "scalar", "avx2"
// or "auto"; returns the resulting table.
const KernelTable& select(const std::string& name);

bool avx2_available();

namespace scalar {
void axpy_kahan(double* y, double* c, const double* x, double a,
                std::size_t n);
std::uint32_t sad_u8(const std::uint8_t* a, const std::uint8_t* b,
                     std::size_t n);
void mul_f32(float* out, const float* a, const float* b, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
float sum_f32(const float* a, std::size_t n);
}  // namespace scalar

#if defined(FREESPACE_HAVE_AVX2)
namespace avx2 {
void axpy_kahan(double* y, double* c, const double* x, double a,
                std::size_t n);
std::uint32_t sad_u8(const std::uint8_t* a, const std::uint8_t* b,
                     std::size_t n);
void mul_f32(float* out, const float* a, const float* b, std::size_t n);
float dot_f32(const float* a, const float* b, std::size_t n);
float sum_f32(const float* a, std::size_t n);
}  // namespace avx2
#endif

}  // namespace freespace::kernels
