#include <random>
#include <vector>

#include "doctest.h"
#include "hicmd/simd/kernels.hpp"

using namespace hicmd::simd;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

template <class T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Ragged sizes exercise every vector-width and row-block tail.
const std::size_t kSizes[][3] = {{1, 1, 1},  {3, 5, 7},    {4, 16, 9},  {5, 17, 33},
                                 {8, 31, 2}, {13, 64, 27}, {7, 100, 1}, {16, 9, 130}};

template <class T>
void check_equivalence(double tol) {
  if (!cpu_supports_avx2()) {
    MESSAGE("AVX2 unavailable; equivalence reduces to scalar-vs-scalar");
  }
  const auto& ref = scalar::table<T>();
  const auto& vec = cpu_supports_avx2() ? avx2::table<T>() : scalar::table<T>();
  std::mt19937 rng(7);
  for (const auto& s : kSizes) {
    const std::size_t m = s[0], n = s[1], k = s[2];
    CAPTURE(m);
    CAPTURE(n);
    CAPTURE(k);
    auto a = random_vec<T>(m * k, rng);
    auto b = random_vec<T>(k * n, rng);
    auto bt = random_vec<T>(n * k, rng);
    auto c0 = random_vec<T>(m * n, rng);

    auto c1 = c0, c2 = c0;
    ref.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    vec.gemm_nn(m, n, k, a.data(), b.data(), c2.data());
    CHECK(max_abs_diff(c1, c2) <= tol * k);

    c1 = c0, c2 = c0;
    ref.gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
    vec.gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
    CHECK(max_abs_diff(c1, c2) <= tol * k);

    auto at = random_vec<T>(k * m, rng);
    c1 = c0, c2 = c0;
    ref.gemm_tn(m, n, k, at.data(), b.data(), c1.data());
    vec.gemm_tn(m, n, k, at.data(), b.data(), c2.data());
    CHECK(max_abs_diff(c1, c2) <= tol * k);

    const std::size_t len = m * n + k;
    auto x = random_vec<T>(len, rng);
    auto y1 = random_vec<T>(len, rng);
    auto y2 = y1;
    ref.axpy(len, T(0.37), x.data(), y1.data());
    vec.axpy(len, T(0.37), x.data(), y2.data());
    CHECK(max_abs_diff(y1, y2) <= tol);
    CHECK(std::abs(double(ref.dot(len, x.data(), y1.data())) - double(vec.dot(len, x.data(), y1.data()))) <=
          tol * len);
    CHECK(std::abs(double(ref.sum(len, x.data())) - double(vec.sum(len, x.data()))) <= tol * len);
  }
}

}  // namespace

TEST_CASE("avx2 kernels match the scalar reference (float)") { check_equivalence<float>(1e-6); }

TEST_CASE("avx2 kernels match the scalar reference (double)") { check_equivalence<double>(1e-14); }

TEST_CASE("gemm against a hand-computed product") {
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  const double a[] = {1, 2, 3, 4};
  const double b[] = {5, 6, 7, 8};
  for (Isa isa : {Isa::kScalar, Isa::kAvx2}) {
    set_active_isa(isa);
    double c[4] = {0, 0, 0, 0};
    kernels<double>().gemm_nn(2, 2, 2, a, b, c);
    CHECK(c[0] == 19);
    CHECK(c[1] == 22);
    CHECK(c[2] == 43);
    CHECK(c[3] == 50);
  }
  set_active_isa(Isa::kAvx2);
}

TEST_CASE("isa override falls back when unsupported") {
  const Isa got = set_active_isa(Isa::kAvx2);
  CHECK(got == (cpu_supports_avx2() ? Isa::kAvx2 : Isa::kScalar));
  CHECK(set_active_isa(Isa::kScalar) == Isa::kScalar);
  CHECK(isa_name(active_isa()) == "scalar");
  set_active_isa(Isa::kAvx2);
}
