#include <doctest.h>

#include <cmath>
#include <numbers>

#include "funreg/kernels.hpp"
#include "funreg/operators.hpp"
#include "funreg/random.hpp"

using namespace funreg;

TEST_CASE("kernel spec validation") {
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::cosine_series(1.0, 16), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::cosine_series(2.0, 3), std::invalid_argument);
}

TEST_CASE("eval_kernel point checks") {
  CHECK(eval_kernel(KernelSpec::brownian(), 0.3, 0.7) == doctest::Approx(0.3));
  CHECK(eval_kernel(KernelSpec::gaussian(0.2), 0.4, 0.4) == doctest::Approx(1.0));
  CHECK(eval_kernel(KernelSpec::sobolev1(), 0.25, 0.5) == doctest::Approx(1.25));

  // cosine-series at (0,0): sum over l of 2 l^-2
  const KernelSpec cs = KernelSpec::cosine_series(2.0, 16);
  Scalar expected = 0.0;
  for (int l = 1; l <= 16; ++l) expected += 2.0 / (static_cast<Scalar>(l) * l);
  CHECK(eval_kernel(cs, 0.0, 0.0) == doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS_AS(eval_kernel(cs, -0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(eval_kernel(cs, 0.5, 1.5), std::invalid_argument);
}

TEST_CASE("kernel symmetry on random pairs") {
  RandomStream rng(11);
  const KernelSpec specs[] = {KernelSpec::gaussian(0.3), KernelSpec::brownian(),
                              KernelSpec::sobolev1(), KernelSpec::cosine_series(2.5, 12)};
  for (const KernelSpec& spec : specs) {
    for (int rep = 0; rep < 20; ++rep) {
      const Scalar s = rng.uniform();
      const Scalar t = rng.uniform();
      CHECK(std::abs(eval_kernel(spec, s, t) - eval_kernel(spec, t, s)) <= 1e-14);
    }
  }
}

TEST_CASE("gram matrices are PSD on random subsets") {
  RandomStream rng(13);
  const KernelSpec specs[] = {KernelSpec::gaussian(0.15), KernelSpec::brownian(),
                              KernelSpec::sobolev1(), KernelSpec::cosine_series(1.5, 8)};
  for (const KernelSpec& spec : specs) {
    const int n = 20;
    std::vector<Scalar> pts(n);
    for (auto& p : pts) p = rng.uniform();
    Matrix gram(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gram(i, j) = eval_kernel(spec, pts[i], pts[j]);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
    const Scalar min_eig = solver.eigenvalues().minCoeff();
    const Scalar max_eig = solver.eigenvalues().maxCoeff();
    CHECK(min_eig >= -1e-8 * max_eig);
  }
}

TEST_CASE("diagonal_sup") {
  const Grid g = build_grid(257, QuadScheme::CompositeTrapezoid);
  CHECK(diagonal_sup(KernelSpec::brownian(), g) == doctest::Approx(1.0));
  CHECK(diagonal_sup(KernelSpec::gaussian(0.7), g) == doctest::Approx(1.0));

  // cosine-series: compare against a dense scan
  const KernelSpec cs = KernelSpec::cosine_series(2.0, 16);
  Scalar dense_max = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Scalar t = static_cast<Scalar>(i) / 9999.0;
    dense_max = std::max(dense_max, eval_kernel(cs, t, t));
  }
  const Scalar grid_max = diagonal_sup(cs, g);
  CHECK(grid_max <= dense_max + 1e-12);
  CHECK(grid_max == doctest::Approx(dense_max).epsilon(1e-3));
}
