// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "lsfd/combiners.hpp"
#include "test_support.hpp"

using namespace lsfd;
using lsfd_test::identity_corr_scenario;

namespace {

double collinearity(const VecC& a, const VecC& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

std::vector<VecC> random_estimates(int m, int k, unsigned seed) {
  rng::Engine gen(seed);
  std::vector<VecC> est(static_cast<size_t>(k));
  for (auto& e : est) e = rng::cnormal_vector(m, gen);
  return est;
}

}  // namespace

TEST_CASE("mrc is the estimate itself") {
  VecC e1 = VecC::Zero(3);
  e1[0] = 1.0;
  CHECK(mrc(e1) == e1);
  const VecC zero = VecC::Zero(3);
  CHECK(mrc(zero).norm() == 0.0);
  rng::Engine gen(2);
  const VecC h = rng::cnormal_vector(5, gen);
  CHECK(mrc(h) == h);
}

TEST_CASE("zf reproduces orthonormal estimates") {
  std::vector<VecC> est(2, VecC::Zero(4));
  est[0][0] = 1.0;
  est[1][2] = 1.0;
  const std::vector<VecC> v = zf_cell(est);
  CHECK((v[0] - est[0]).norm() < 1e-12);
  CHECK((v[1] - est[1]).norm() < 1e-12);
}

TEST_CASE("zf satisfies the unit-cross-gain identity") {
  const auto est = random_estimates(6, 3, 7);
  const std::vector<VecC> v = zf_cell(est);
  for (int k = 0; k < 3; ++k)
    for (int kp = 0; kp < 3; ++kp) {
      const cplx g = v[static_cast<size_t>(k)].dot(est[static_cast<size_t>(kp)]);
      CHECK(std::abs(g - (k == kp ? cplx(1.0) : cplx(0.0))) < 1e-10);
    }
}

TEST_CASE("zf rejects underdetermined or rank-deficient estimates") {
  CHECK_THROWS_AS(zf_cell(random_estimates(2, 3, 5)), std::invalid_argument);  // M < K
  auto est = random_estimates(4, 2, 6);
  est[1] = est[0];  // duplicated direction
  CHECK_THROWS_AS(zf_cell(est), std::invalid_argument);
}

TEST_CASE("rzf keeps the single-user direction") {
  VecC h = VecC::Zero(4);
  h[0] = cplx(2.0, -1.0);
  const std::vector<VecC> v = rzf_cell({h}, {10.0}, 0.5);
  CHECK(collinearity(v[0], h) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rzf direction converges to mrc as the regularizer dominates") {
  const auto est = random_estimates(5, 2, 9);
  const std::vector<VecC> v = rzf_cell(est, {1.0, 1.0}, 1e12);
  for (int k = 0; k < 2; ++k)
    CHECK(collinearity(v[static_cast<size_t>(k)], est[static_cast<size_t>(k)]) ==
          Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rzf matches the analytic inverse for two orthogonal estimates") {
  VecC h1 = VecC::Zero(4), h2 = VecC::Zero(4);
  h1[0] = 2.0;
  h2[1] = cplx(0.0, 3.0);
  const double p1 = 5.0, p2 = 7.0, sigma2 = 0.25;
  const std::vector<VecC> v = rzf_cell({h1, h2}, {p1, p2}, sigma2);
  // (p1 h1 h1^H + p2 h2 h2^H + s I)^{-1} h1 = h1 / (p1 |h1|^2 + s)
  CHECK((v[0] - h1 / (p1 * h1.squaredNorm() + sigma2)).norm() < 1e-12);
  CHECK((v[1] - h2 / (p2 * h2.squaredNorm() + sigma2)).norm() < 1e-12);
  CHECK(std::abs(v[0].dot(h2)) < 1e-12);
}

TEST_CASE("make_combiners dispatches schemes and applies the scale") {
  const int L = 2, K = 2, M = 4;
  const Scenario s = identity_corr_scenario(L, K, M, 0.3);
  std::vector<VecC> est(static_cast<size_t>(L * K));
  rng::Engine gen(3);
  for (auto& e : est) e = rng::cnormal_vector(M, gen);

  CombinerOptions opt;
  opt.scheme = CombinerScheme::kMrc;
  opt.scale = 0.5;
  const CombinerSet mrc_set = make_combiners(s, est, {}, opt);
  CHECK((mrc_set.of(1, 0) - 0.5 * est[static_cast<size_t>(1 * K + 0)]).norm() < 1e-14);

  opt.scheme = CombinerScheme::kRzf;
  opt.scale = 1.0;
  const CombinerSet rzf_set = make_combiners(s, est, {}, opt);
  CHECK(rzf_set.of(0, 0).norm() > 0.0);

  opt.scheme = CombinerScheme::kZf;
  const CombinerSet zf_set = make_combiners(s, est, {}, opt);
  CHECK(std::abs(zf_set.of(0, 0).dot(est[1]) - cplx(0.0)) < 1e-10);
  CHECK(std::abs(zf_set.of(0, 0).dot(est[0]) - cplx(1.0)) < 1e-10);
}

TEST_CASE("rzf power weighting is configurable") {
  const int L = 1, K = 2, M = 4;
  const Scenario s = identity_corr_scenario(L, K, M, 0.3);
  const auto est = random_estimates(M, K, 11);

  CombinerOptions weighted;
  weighted.scheme = CombinerScheme::kRzf;
  weighted.rzf_power_weights = true;
  CombinerOptions unweighted = weighted;
  unweighted.rzf_power_weights = false;

  const std::vector<double> powers = {200.0, 1.0};
  const CombinerSet a = make_combiners(s, est, powers, weighted);
  const CombinerSet b = make_combiners(s, est, powers, unweighted);
  CHECK((a.of(0, 0) - b.of(0, 0)).norm() > 1e-12);  // weights change the solution
}
