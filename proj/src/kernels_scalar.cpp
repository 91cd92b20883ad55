#include "freespace/kernels.hpp"

#include <cmath>

namespace freespace::kernels::scalar {

void axpy_kahan(double* y, double* c, const double* x, double a,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double term = a * x[i];
    const double corrected = term - c[i];
    const double old = y[i];
    const double t = old + corrected;
    c[i] = (t - old) - corrected;
    y[i] = t;
  }
}

std::uint32_t sad_u8(const std::uint8_t* a, const std::uint8_t* b,
                     std::size_t n) {
  std::uint32_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    acc += static_cast<std::uint32_t>(d < 0 ? -d : d);
  }
  return acc;
}

void mul_f32(float* out, const float* a, const float* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

float sum_f32(const float* a, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

}  // namespace freespace::kernels::scalar
