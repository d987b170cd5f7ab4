// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "lsfd/channel.hpp"
#include "lsfd/experiments.hpp"
#include "test_support.hpp"

using namespace lsfd;
using lsfd_test::identity_corr_scenario;
using lsfd_test::synthetic_scenario;

TEST_CASE("zero correlation matrix gives a zero channel") {
  const Scenario s = synthetic_scenario(1, 1, 4, 1.0, [](int, int, int) {
    return MatC::Zero(4, 4);
  });
  ChannelSampler sampler(s);
  rng::Engine gen(1);
  const ChannelRealization ch = sampler.sample(gen);
  CHECK(ch.of(0, 0, 0).norm() == 0.0);
}

TEST_CASE("channel sampling is deterministic per stream") {
  const Scenario s = identity_corr_scenario(2, 2, 4, 1e-3);
  ChannelSampler sampler(s);
  rng::Engine g1 = rng::make_stream(9, rng::kBlockDomain, 0, 42);
  rng::Engine g2 = rng::make_stream(9, rng::kBlockDomain, 0, 42);
  const ChannelRealization a = sampler.sample(g1);
  const ChannelRealization b = sampler.sample(g2);
  for (size_t i = 0; i < a.h.size(); ++i) CHECK(a.h[i] == b.h[i]);
}

TEST_CASE("empirical channel covariance converges to R") {
  const int M = 4;
  const Scenario s = identity_corr_scenario(1, 1, M, 1.0);
  ChannelSampler sampler(s);
  MatC cov = MatC::Zero(M, M);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    rng::Engine gen = rng::make_stream(3, rng::kBlockDomain, 7, static_cast<std::uint64_t>(i));
    const VecC h = sampler.sample(gen).of(0, 0, 0);
    cov.noalias() += h * h.adjoint();
  }
  cov /= n;
  CHECK((cov - MatC::Identity(M, M)).norm() / std::sqrt(static_cast<double>(M)) < 0.05);
}

TEST_CASE("indefinite correlation matrices are rejected after regularization") {
  const Scenario s = synthetic_scenario(1, 1, 2, 1.0, [](int, int, int) {
    MatC r(2, 2);
    r << 1.0, 0.0, 0.0, -0.5;
    return r;
  });
  CHECK_THROWS_AS(ChannelSampler(s), std::runtime_error);
}

TEST_CASE("tiny negative eigenvalues are clamped, not fatal") {
  const Scenario s = synthetic_scenario(1, 1, 2, 1.0, [](int, int, int) {
    MatC r(2, 2);
    r << 1.0, 0.0, 0.0, -1e-14;
    return r;
  });
  ChannelSampler sampler(s);
  rng::Engine gen(4);
  const ChannelRealization ch = sampler.sample(gen);
  CHECK(std::abs(ch.of(0, 0, 0)[1]) < 1e-6);  // clamped direction carries no energy
}

TEST_CASE("noise-free pilot signal matches its construction") {
  const int L = 2, K = 2, M = 4;
  const Scenario s = identity_corr_scenario(L, K, M, 0.0, 1.0, 100.0);
  ChannelSampler sampler(s);
  rng::Engine gen = rng::make_stream(5, rng::kBlockDomain, 0, 0);
  const ChannelRealization ch = sampler.sample(gen);

  rng::Engine g_noise(1);
  const std::vector<MatC> y = pilot_received(s, ch, g_noise);
  for (int bs = 0; bs < L; ++bs)
    for (int k = 0; k < K; ++k) {
      // Y_l phi_k = K sum_l' sqrt(phat) h; contains every pilot-sharing user.
      VecC expected = VecC::Zero(M);
      for (int lp = 0; lp < L; ++lp)
        expected += static_cast<double>(K) * std::sqrt(s.pilot_power_of(lp, k)) * ch.of(lp, k, bs);
      const VecC q = std::sqrt(static_cast<double>(K)) * y[static_cast<size_t>(bs)].col(k);
      CHECK((q - expected).norm() < 1e-9 * expected.norm());
    }

  // The fast projection path agrees exactly when there is no noise.
  rng::Engine g2(1);
  const std::vector<VecC> proj = draw_pilot_projections(s, ch, g2);
  for (int bs = 0; bs < L; ++bs)
    for (int k = 0; k < K; ++k) {
      const VecC q = std::sqrt(static_cast<double>(K)) * y[static_cast<size_t>(bs)].col(k);
      CHECK((proj[static_cast<size_t>(bs * K + k)] - q).norm() < 1e-9 * q.norm());
    }
}

TEST_CASE("zero pilot power leaves only noise") {
  const int L = 1, K = 2, M = 4;
  Scenario s = identity_corr_scenario(L, K, M, 0.0);
  s.pilot_power.assign(s.pilot_power.size(), 0.0);
  ChannelSampler sampler(s);
  rng::Engine gen(2);
  const ChannelRealization ch = sampler.sample(gen);
  rng::Engine g_noise(3);
  const std::vector<MatC> y = pilot_received(s, ch, g_noise);
  CHECK(y[0].norm() == 0.0);  // sigma2 = 0 and no pilot power: exactly zero
}

TEST_CASE("psi for identity correlation") {
  const int M = 4;
  const double beta = 2.0, phat = 50.0, sigma2 = 0.3;
  SECTION("multi cell") {
    const int L = 3, K = 2;
    const Scenario s = identity_corr_scenario(L, K, M, sigma2, beta, phat);
    const MatC psi = compute_psi(s, 0, 1);
    const double expected = K * L * phat * beta + sigma2;
    CHECK((psi - expected * MatC::Identity(M, M)).norm() < 1e-9 * expected);
  }
  SECTION("single cell") {
    const int K = 2;
    const Scenario s = identity_corr_scenario(1, K, M, sigma2, beta, phat);
    const MatC psi = compute_psi(s, 1, 0);
    const double expected = K * phat * beta + sigma2;
    CHECK((psi - expected * MatC::Identity(M, M)).norm() < 1e-9 * expected);
  }
}

TEST_CASE("psi matches the Monte Carlo covariance of de-spread pilots") {
  NetworkConfig cfg;
  cfg.num_cells = 2;
  cfg.users_per_cell = 2;
  cfg.num_antennas = 4;
  cfg.varsigma = 0.6;
  cfg.seed = 11;
  const Scenario s = generate_scenario(cfg, 0);
  ChannelSampler sampler(s);
  const MmseEstimator est(s);
  const int n = 30000;
  MatC cov = MatC::Zero(4, 4);
  for (int i = 0; i < n; ++i) {
    rng::Engine gen = rng::make_stream(cfg.seed, rng::kBlockDomain, 99, static_cast<std::uint64_t>(i));
    const ChannelRealization ch = sampler.sample(gen);
    rng::Engine g_noise = rng::make_stream(cfg.seed, rng::kBlockDomain, 100, static_cast<std::uint64_t>(i));
    const std::vector<MatC> y = pilot_received(s, ch, g_noise);
    // Y phi_k / sqrt(K) = Y.col(k), whose covariance should be Psi.
    const VecC q = y[1].col(0);
    cov.noalias() += q * q.adjoint();
  }
  cov /= n;
  const MatC& psi = est.psi(1, 0);
  CHECK((cov - psi).norm() / psi.norm() < 0.05);
}

TEST_CASE("mmse estimate approaches the channel as noise vanishes") {
  const int M = 4;
  const double beta = 1.0, phat = 100.0;
  const Scenario s = identity_corr_scenario(1, 1, M, 1e-10 * phat * beta, beta, phat);
  ChannelSampler sampler(s);
  const MmseEstimator est(s);
  rng::Engine gen = rng::make_stream(8, rng::kBlockDomain, 0, 0);
  const ChannelRealization ch = sampler.sample(gen);
  const std::vector<VecC> proj = draw_pilot_projections(s, ch, gen);
  const VecC h_hat = est.estimate_user(s, proj[0], 0, 0, 0);
  CHECK((h_hat - ch.of(0, 0, 0)).norm() < 1e-4 * ch.of(0, 0, 0).norm());
}

TEST_CASE("mmse estimate collapses to the prior mean under huge noise") {
  const int M = 4;
  const double beta = 1.0, phat = 100.0;
  const Scenario s = identity_corr_scenario(1, 1, M, 1e12 * phat * beta, beta, phat);
  ChannelSampler sampler(s);
  const MmseEstimator est(s);
  rng::Engine gen = rng::make_stream(8, rng::kBlockDomain, 0, 0);
  const ChannelRealization ch = sampler.sample(gen);
  const std::vector<VecC> proj = draw_pilot_projections(s, ch, gen);
  const VecC h_hat = est.estimate_user(s, proj[0], 0, 0, 0);
  CHECK(h_hat.norm() < 1e-4 * ch.of(0, 0, 0).norm());
}

TEST_CASE("estimate covariance and orthogonality match the analytic Phi") {
  NetworkConfig cfg;
  cfg.num_cells = 2;
  cfg.users_per_cell = 2;
  cfg.num_antennas = 8;
  cfg.varsigma = 0.5;
  cfg.seed = 21;
  const Scenario s = generate_scenario(cfg, 0);
  const EstimationSanity sanity = run_estimation_sanity(s, 100000, 1);
  CHECK(sanity.phi_rel_error < 0.05);
  CHECK(sanity.orthogonality_rel < 0.05);
  CHECK(sanity.psi_rel_error < 0.05);
}

TEST_CASE("phi is PSD and dominated by R") {
  NetworkConfig cfg;
  cfg.num_cells = 2;
  cfg.users_per_cell = 2;
  cfg.num_antennas = 8;
  cfg.varsigma = 0.7;
  cfg.seed = 33;
  const Scenario s = generate_scenario(cfg, 2);
  const MmseEstimator est(s);
  for (int l = 0; l < 2; ++l)
    for (int k = 0; k < 2; ++k)
      for (int bs = 0; bs < 2; ++bs) {
        const MatC phi = est.phi(s, l, k, bs);
        const MatC err = s.R(l, k, bs) - phi;  // estimation-error covariance
        const double scale = s.R(l, k, bs).trace().real() / s.antennas();
        CHECK(hermitian_error(phi) < 1e-10 * scale);
        CHECK(min_eigenvalue(0.5 * (phi + MatC(phi.adjoint()))) > -1e-8 * scale);
        CHECK(min_eigenvalue(0.5 * (err + MatC(err.adjoint()))) > -1e-8 * scale);
      }
}

TEST_CASE("pilot-sharing estimates are reconstructed from one stored projection") {
  NetworkConfig cfg;
  cfg.num_cells = 2;
  cfg.users_per_cell = 2;
  cfg.num_antennas = 4;
  cfg.seed = 17;
  const Scenario s = generate_scenario(cfg, 1);
  ChannelSampler sampler(s);
  const MmseEstimator est(s);
  rng::Engine gen = rng::make_stream(cfg.seed, rng::kBlockDomain, 0, 0);
  const ChannelRealization ch = sampler.sample(gen);
  const std::vector<MatC> y = pilot_received(s, ch, gen);
  const EstimateSet es = est.estimate(s, y);

  const int bs = 0, k = 1;
  const VecC& q = es.proj_of(bs, k);
  const VecC own = est.estimate_user(s, q, bs, bs, k);
  const VecC contaminating = est.estimate_user(s, q, bs, 1, k);
  CHECK((own - es.own_of(bs, k)).norm() < 1e-12 * own.norm());

  // Both estimates are the same projected observation passed through their
  // R Psi^{-1} front ends; check the contaminating one explicitly.
  Eigen::LLT<MatC> llt(est.psi(bs, k));
  const VecC expected = std::sqrt(s.pilot_power_of(1, k)) * (s.R(1, k, bs) * llt.solve(q));
  CHECK((contaminating - expected).norm() < 1e-10 * expected.norm());
}
