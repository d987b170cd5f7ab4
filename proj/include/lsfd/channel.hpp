// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lsfd/common.hpp"
#include "lsfd/scenario.hpp"

namespace lsfd {

/// One coherence block of small-scale fading: h[(l,k,bs)] is the channel
/// from user k in cell l to BS `bs`.
struct ChannelRealization {
  int L = 0, K = 0, M = 0;
  std::vector<VecC> h;

  const VecC& of(int l, int k, int bs) const {
    return h[static_cast<size_t>((l * K + k) * L + bs)];
  }
};

/// Pilot-sum matrix for pilot k at a BS: K * sum_l' phat_{l',k} R_{l',k}^bs
/// + sigma^2 I. This is 1/K times the covariance of the de-spread pilot
/// observation, and what the MMSE estimator inverts.
inline MatC compute_psi(const Scenario& s, int pilot, int bs) {
  const int M = s.antennas();
  MatC psi = s.sigma2 * MatC::Identity(M, M);
  for (int lp = 0; lp < s.cells(); ++lp)
    psi += static_cast<double>(s.users()) * s.pilot_power_of(lp, pilot) * s.R(lp, pilot, bs);
  return psi;
}

/// Samples correlated Rayleigh channels as F * g with F the Hermitian square
/// root of each correlation matrix (robust to rank deficiency) and g a
/// standard complex Gaussian vector. Factors are computed once and reused.
class ChannelSampler {
 public:
  explicit ChannelSampler(const Scenario& s)
      : L_(s.cells()), K_(s.users()), M_(s.antennas()) {
    factor_.reserve(static_cast<size_t>(L_ * K_ * L_));
    for (int l = 0; l < L_; ++l)
      for (int k = 0; k < K_; ++k)
        for (int bs = 0; bs < L_; ++bs) factor_.push_back(hermitian_sqrt(s.R(l, k, bs), M_));
  }

  ChannelRealization sample(rng::Engine& gen) const {
    ChannelRealization r;
    r.L = L_;
    r.K = K_;
    r.M = M_;
    r.h.reserve(factor_.size());
    for (const MatC& f : factor_) r.h.push_back(f * rng::cnormal_vector(M_, gen));
    return r;
  }

 private:
  static MatC hermitian_sqrt(const MatC& r, int m) {
    const double tr = r.trace().real();
    MatC work = r;
    for (int pass = 0; pass < 2; ++pass) {
      Eigen::SelfAdjointEigenSolver<MatC> es(work);
      if (es.info() == Eigen::Success &&
          es.eigenvalues().minCoeff() >= -1e-8 * std::max(tr, 0.0) / m) {
        VecR lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
      }
      // One-shot regularization of a numerically indefinite matrix.
      work = r + (1e-12 * tr / m) * MatC::Identity(m, m);
    }
    throw std::runtime_error("ChannelSampler: correlation matrix not factorizable");
  }

  int L_, K_, M_;
  std::vector<MatC> factor_;
};

/// Received pilot-phase signal Y_l (M x K) at every BS. The pilot book is
/// the scaled identity: user k sends sqrt(K) e_k, so pilots are orthogonal
/// with squared norm K and pilot-sharing users collide per index.
inline std::vector<MatC> pilot_received(const Scenario& s, const ChannelRealization& ch,
                                        rng::Engine& gen) {
  const int L = s.cells(), K = s.users(), M = s.antennas();
  const double root_k = std::sqrt(static_cast<double>(K));
  const double noise_std = std::sqrt(s.sigma2);
  std::vector<MatC> y(static_cast<size_t>(L));
  for (int bs = 0; bs < L; ++bs) {
    MatC& yl = y[static_cast<size_t>(bs)];
    yl = MatC::Zero(M, K);
    for (int k = 0; k < K; ++k)
      for (int lp = 0; lp < L; ++lp)
        yl.col(k) += root_k * std::sqrt(s.pilot_power_of(lp, k)) * ch.of(lp, k, bs);
    for (int k = 0; k < K; ++k)
      for (int mm = 0; mm < M; ++mm) yl(mm, k) += noise_std * rng::cnormal(gen);
  }
  return y;
}

/// De-spread pilot observations q_{bs,k} = Y_bs phi_k sampled without
/// forming the full pilot matrix; distribution-identical to projecting
/// pilot_received and much cheaper in Monte Carlo loops.
inline std::vector<VecC> draw_pilot_projections(const Scenario& s, const ChannelRealization& ch,
                                                rng::Engine& gen) {
  const int L = s.cells(), K = s.users(), M = s.antennas();
  const double root_k = std::sqrt(static_cast<double>(K));
  const double noise_std = std::sqrt(s.sigma2);
  std::vector<VecC> q(static_cast<size_t>(L * K));
  for (int bs = 0; bs < L; ++bs) {
    for (int k = 0; k < K; ++k) {
      VecC acc = VecC::Zero(M);
      for (int lp = 0; lp < L; ++lp)
        acc += static_cast<double>(K) * std::sqrt(s.pilot_power_of(lp, k)) * ch.of(lp, k, bs);
      for (int mm = 0; mm < M; ++mm) acc[mm] += root_k * noise_std * rng::cnormal(gen);
      q[static_cast<size_t>(bs * K + k)] = acc;
    }
  }
  return q;
}

inline std::vector<VecC> project_pilots(const Scenario& s, const std::vector<MatC>& y) {
  const int L = s.cells(), K = s.users();
  const double root_k = std::sqrt(static_cast<double>(K));
  std::vector<VecC> q(static_cast<size_t>(L * K));
  for (int bs = 0; bs < L; ++bs)
    for (int k = 0; k < K; ++k)
      q[static_cast<size_t>(bs * K + k)] = root_k * y[static_cast<size_t>(bs)].col(k);
  return q;
}

/// MMSE channel estimates at one or all BSs, plus the stored de-spread
/// projections so estimates of pilot-sharing users can be reconstructed
/// from the same observation.
struct EstimateSet {
  int L = 0, K = 0;
  std::vector<VecC> own;   // (l,k): BS l's estimate of its own user k
  std::vector<VecC> proj;  // (bs,k): de-spread pilot observation

  const VecC& own_of(int l, int k) const { return own[static_cast<size_t>(l * K + k)]; }
  const VecC& proj_of(int bs, int k) const { return proj[static_cast<size_t>(bs * K + k)]; }
};

class MmseEstimator {
 public:
  explicit MmseEstimator(const Scenario& s) : L_(s.cells()), K_(s.users()) {
    psi_.reserve(static_cast<size_t>(L_ * K_));
    llt_.resize(static_cast<size_t>(L_ * K_));
    for (int bs = 0; bs < L_; ++bs) {
      for (int k = 0; k < K_; ++k) {
        MatC psi = compute_psi(s, k, bs);
        auto& llt = llt_[static_cast<size_t>(bs * K_ + k)];
        llt.compute(psi);
        if (llt.info() != Eigen::Success)
          throw std::runtime_error("MmseEstimator: pilot covariance not positive definite");
        psi_.push_back(std::move(psi));
      }
    }
  }

  const MatC& psi(int bs, int k) const { return psi_[static_cast<size_t>(bs * K_ + k)]; }

  /// Estimate of the channel from user (l,k) seen at `bs`, from that BS's
  /// de-spread observation of pilot k.
  VecC estimate_user(const Scenario& s, const VecC& proj, int bs, int l, int k) const {
    const VecC x = llt_[static_cast<size_t>(bs * K_ + k)].solve(proj);
    return std::sqrt(s.pilot_power_of(l, k)) * (s.R(l, k, bs) * x);
  }

  /// Own-cell estimates for every BS from stored projections.
  std::vector<VecC> estimate_own(const Scenario& s, const std::vector<VecC>& proj) const {
    std::vector<VecC> own(static_cast<size_t>(L_ * K_));
    for (int l = 0; l < L_; ++l)
      for (int k = 0; k < K_; ++k)
        own[static_cast<size_t>(l * K_ + k)] =
            estimate_user(s, proj[static_cast<size_t>(l * K_ + k)], l, l, k);
    return own;
  }

  EstimateSet estimate(const Scenario& s, const std::vector<MatC>& y) const {
    EstimateSet e;
    e.L = L_;
    e.K = K_;
    e.proj = project_pilots(s, y);
    e.own = estimate_own(s, e.proj);
    return e;
  }

  /// Covariance of the estimate of the (l,k) -> bs channel:
  /// K * phat * R Psi^{-1} R.
  MatC phi(const Scenario& s, int l, int k, int bs) const {
    const MatC& r = s.R(l, k, bs);
    return static_cast<double>(K_) * s.pilot_power_of(l, k) * r *
           llt_[static_cast<size_t>(bs * K_ + k)].solve(r);
  }

 private:
  int L_, K_;
  std::vector<MatC> psi_;
  std::vector<Eigen::LLT<MatC>> llt_;
};

}  // namespace lsfd
