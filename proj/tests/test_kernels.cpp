#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "freespace/kernels.hpp"
#include "freespace/rng.hpp"

using namespace freespace;

namespace {

std::vector<double> random_doubles(Rng& rng, std::size_t n, double lo,
                                   double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<float> random_floats(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-2.0, 2.0));
  return v;
}

}  // namespace

TEST_CASE("scalar axpy_kahan compensates lost low-order bits") {
  // 1 + many tiny increments: plain summation loses them all, Kahan keeps
  // the total to within a few ulps.
  const std::size_t n = 4;
  std::vector<double> y(n, 1.0), c(n, 0.0), x(n, 1.0);
  const double tiny = 1e-17;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r)
    kernels::scalar::axpy_kahan(y.data(), c.data(), x.data(), tiny, n);
  const double expected = 1.0 + reps * tiny;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(y[i] - c[i] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(y[i] != 1.0);  // plain summation would have stayed at exactly 1
  }
}

TEST_CASE("scalar sad_u8 matches a naive reference") {
  Rng rng(11);
  std::vector<std::uint8_t> a(301), b(301);
  for (auto& v : a) v = static_cast<std::uint8_t>(rng.index(256));
  for (auto& v : b) v = static_cast<std::uint8_t>(rng.index(256));
  std::uint32_t expected = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    expected += static_cast<std::uint32_t>(std::abs(int(a[i]) - int(b[i])));
  CHECK(kernels::scalar::sad_u8(a.data(), b.data(), a.size()) == expected);
}

TEST_CASE("avx2 variants agree with the scalar reference") {
  if (!kernels::avx2_available()) {
    MESSAGE("AVX2 unavailable; equivalence test skipped");
    return;
  }
  const auto& scalar = kernels::table(kernels::Isa::kScalar);
  const auto& avx2 = kernels::table(kernels::Isa::kAvx2);
  Rng rng(42);

  // Odd lengths exercise the remainder loops.
  for (const std::size_t n : {1u, 7u, 8u, 31u, 64u, 257u, 1000u}) {
    CAPTURE(n);
    {
      // axpy_kahan: elementwise, must be bit-identical.
      auto x = random_doubles(rng, n, -3.0, 3.0);
      auto y0 = random_doubles(rng, n, -1.0, 1.0);
      auto c0 = std::vector<double>(n, 0.0);
      auto y1 = y0;
      auto c1 = c0;
      for (int rep = 0; rep < 5; ++rep) {
        scalar.axpy_kahan(y0.data(), c0.data(), x.data(), 0.37 + rep, n);
        avx2.axpy_kahan(y1.data(), c1.data(), x.data(), 0.37 + rep, n);
      }
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(y0[i] == y1[i]);
        CHECK(c0[i] == c1[i]);
      }
    }
    {
      // sad_u8 and mul_f32: exact.
      std::vector<std::uint8_t> a(n), b(n);
      for (auto& v : a) v = static_cast<std::uint8_t>(rng.index(256));
      for (auto& v : b) v = static_cast<std::uint8_t>(rng.index(256));
      CHECK(scalar.sad_u8(a.data(), b.data(), n) ==
            avx2.sad_u8(a.data(), b.data(), n));

      auto fa = random_floats(rng, n);
      auto fb = random_floats(rng, n);
      std::vector<float> out0(n), out1(n);
      scalar.mul_f32(out0.data(), fa.data(), fb.data(), n);
      avx2.mul_f32(out1.data(), fa.data(), fb.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(out0[i] == out1[i]);
    }
    {
      // Reductions reorder lanes; compare with a relative tolerance.
      auto fa = random_floats(rng, n);
      auto fb = random_floats(rng, n);
      const double d0 = scalar.dot_f32(fa.data(), fb.data(), n);
      const double d1 = avx2.dot_f32(fa.data(), fb.data(), n);
      CHECK(d1 == doctest::Approx(d0).epsilon(1e-4));
      const double s0 = scalar.sum_f32(fa.data(), n);
      const double s1 = avx2.sum_f32(fa.data(), n);
      CHECK(s1 == doctest::Approx(s0).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("runtime selection honors overrides") {
  const auto& before = kernels::select("scalar");
  CHECK(std::string(before.name) == "scalar");
  const auto& after = kernels::select("auto");
  if (kernels::avx2_available()) {
    CHECK(std::string(after.name) == "avx2");
  } else {
    CHECK(std::string(after.name) == "scalar");
  }
  CHECK_THROWS(kernels::select("sse9"));
}
