// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include "lsfd/channel.hpp"
#include "lsfd/combiners.hpp"
#include "lsfd/common.hpp"
#include "lsfd/scenario.hpp"

namespace lsfd {

inline double se_prelog(int users, int tau_c) {
  return 1.0 - static_cast<double>(users) / static_cast<double>(tau_c);
}

inline double se_from_sinr(double sinr, int users, int tau_c) {
  return se_prelog(users, tau_c) * std::log2(1.0 + sinr);
}

// ---------------------------------------------------------------------------
// Closed-form statistics for MRC in the first layer.
//
// For every pilot k the de-spread observation at BS l'' has covariance
// K * Psi_{l'',k}; the coefficients below are the coherent gain (b), the
// non-coherent interference (c) and the noise (d) moments of the per-cell
// symbol estimates. They are exact, so the two-layer SINR of any LSFD
// vector is available without sampling. All entries are real nonnegative.
// ---------------------------------------------------------------------------

struct ClosedFormCoefficients {
  int L = 0, K = 0, M = 0, tau_c = 0;
  double sigma2 = 0.0;
  std::vector<double> b_store;  // (lp, k, lpp)
  std::vector<double> c_store;  // (lpp, k, lp, kp)
  std::vector<double> d_store;  // (lp, k)

  double b(int lp, int k, int lpp) const {
    return b_store[static_cast<size_t>((lp * K + k) * L + lpp)];
  }
  double c(int lpp, int k, int lp, int kp) const {
    return c_store[static_cast<size_t>(((lpp * K + k) * L + lp) * K + kp)];
  }
  double d(int lp, int k) const { return d_store[static_cast<size_t>(lp * K + k)]; }

  /// Coherent gain vector of user (lp,k) across BSs.
  VecR b_vec(int lp, int k) const {
    VecR v(L);
    for (int lpp = 0; lpp < L; ++lpp) v[lpp] = b(lp, k, lpp);
    return v;
  }
};

inline ClosedFormCoefficients closed_form_coefficients(const Scenario& s) {
  const int L = s.cells(), K = s.users(), M = s.antennas();
  ClosedFormCoefficients cf;
  cf.L = L;
  cf.K = K;
  cf.M = M;
  cf.tau_c = s.config.coherence_block_len;
  cf.sigma2 = s.sigma2;
  cf.b_store.assign(static_cast<size_t>(L * K * L), 0.0);
  cf.c_store.assign(static_cast<size_t>(L * K * L * K), 0.0);
  cf.d_store.assign(static_cast<size_t>(L * K), 0.0);

  for (int lpp = 0; lpp < L; ++lpp) {
    for (int k = 0; k < K; ++k) {
      Eigen::LLT<MatC> llt(compute_psi(s, k, lpp));
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("closed_form_coefficients: Psi not PD");
      const MatC& r_own = s.R(lpp, k, lpp);
      const MatC t1 = llt.solve(r_own);   // Psi^{-1} R_own
      const MatC a2 = r_own * t1;         // R_own Psi^{-1} R_own
      const double phat_serving = s.pilot_power_of(lpp, k);
      for (int lp = 0; lp < L; ++lp) {
        const double btr = trace_product(t1, s.R(lp, k, lpp)).real();
        cf.b_store[static_cast<size_t>((lp * K + k) * L + lpp)] =
            std::sqrt(static_cast<double>(K) * s.pilot_power_of(lp, k) * phat_serving) * btr;
        for (int kp = 0; kp < K; ++kp)
          cf.c_store[static_cast<size_t>(((lpp * K + k) * L + lp) * K + kp)] =
              phat_serving * trace_product(a2, s.R(lp, kp, lpp)).real();
      }
      cf.d_store[static_cast<size_t>(lpp * K + k)] =
          s.sigma2 * phat_serving * trace_product(t1, r_own).real();
    }
  }
  return cf;
}

/// Effective SINR of user (l,k) after both decoding layers, for data powers
/// p (mW, indexed (l,k)) and LSFD vector a. Invariant to rescaling of a;
/// defined as 0 when a (or the power) vanishes.
inline double sinr_closed_form(const ClosedFormCoefficients& cf, const std::vector<double>& p,
                               const VecC& a, int l, int k) {
  const int L = cf.L, K = cf.K;
  double signal = 0.0, contamination = 0.0;
  for (int lp = 0; lp < L; ++lp) {
    cplx sum = 0.0;
    for (int lpp = 0; lpp < L; ++lpp) sum += std::conj(a[lpp]) * cf.b(lp, k, lpp);
    const double val = p[static_cast<size_t>(lp * K + k)] * std::norm(sum);
    if (lp == l)
      signal = val;
    else
      contamination += val;
  }
  double noncoherent = 0.0, noise = 0.0;
  for (int lpp = 0; lpp < L; ++lpp) {
    const double a2 = std::norm(a[lpp]);
    if (a2 == 0.0) continue;
    double acc = 0.0;
    for (int lp = 0; lp < L; ++lp)
      for (int kp = 0; kp < K; ++kp)
        acc += p[static_cast<size_t>(lp * K + kp)] * cf.c(lpp, k, lp, kp);
    noncoherent += a2 * acc;
    noise += a2 * cf.d(lpp, k);
  }
  const double den = contamination + noncoherent + noise;
  if (den <= 0.0) return 0.0;
  return signal / den;
}

/// Interference-plus-noise normal matrix of the closed-form SINR: pilot
/// contamination outer products for lp != l plus the diagonal of power-
/// weighted c sums and d.
inline MatR lsfd_normal_matrix(const ClosedFormCoefficients& cf, const std::vector<double>& p,
                               int l, int k) {
  const int L = cf.L, K = cf.K;
  MatR c = MatR::Zero(L, L);
  for (int lp = 0; lp < L; ++lp) {
    if (lp == l) continue;
    const VecR bv = cf.b_vec(lp, k);
    c.noalias() += p[static_cast<size_t>(lp * K + k)] * bv * bv.transpose();
  }
  for (int i = 0; i < L; ++i) {
    double acc = cf.d(i, k);
    for (int lp = 0; lp < L; ++lp)
      for (int kp = 0; kp < K; ++kp)
        acc += p[static_cast<size_t>(lp * K + kp)] * cf.c(i, k, lp, kp);
    c(i, i) += acc;
  }
  return c;
}

struct LsfdSolution {
  VecC a;
  double sinr = 0.0;
  double se = 0.0;
};

/// SE-optimal LSFD vector for MRC from the closed-form statistics, together
/// with the attained SINR p * b^T C^{-1} b and SE.
inline LsfdSolution optimal_lsfd_closed_form(const ClosedFormCoefficients& cf,
                                             const std::vector<double>& p, int l, int k) {
  const MatR c = lsfd_normal_matrix(cf, p, l, k);
  Eigen::LLT<MatR> llt(c);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("optimal_lsfd_closed_form: normal matrix not PD");
  const VecR bv = cf.b_vec(l, k);
  const VecR a = llt.solve(bv);
  LsfdSolution sol;
  sol.a = a.cast<cplx>();
  sol.sinr = p[static_cast<size_t>(l * cf.K + k)] * bv.dot(a);
  sol.se = se_from_sinr(sol.sinr, cf.K, cf.tau_c);
  return sol;
}

/// Own-cell selector e_l as an LSFD vector (single-layer decoding).
inline VecC single_layer_lsfd(int L, int l) {
  VecC a = VecC::Zero(L);
  a[l] = 1.0;
  return a;
}

// ---------------------------------------------------------------------------
// Monte Carlo expectations for arbitrary first-layer combiners.
//
// The raw per-block statistics are kept power-free: gain holds
// E{v_{l'',k}^H h_{l',k}^{l''}} for pilot-sharing users, `second` the full
// second moments E{t t^H} of the per-BS symbol-estimate vectors for every
// source user, and vnorm2 the combiner energies E{||v_{l'',k}||^2}. The
// power-weighted interference matrices are assembled on demand, so one
// sampling run serves any data-power vector (the combiners themselves are
// built once, at the powers given to estimate_expectations).
// ---------------------------------------------------------------------------

struct ExpectationSet {
  int L = 0, K = 0;
  double sigma2 = 0.0;
  cplx combiner_scale = 1.0;
  long long n_blocks = 0;
  std::vector<MatC> gain;    // per k: L x L, (row l''=BS, col l'=source cell)
  std::vector<MatC> second;  // per (k,lp,kp): L x L second moment
  std::vector<VecR> vnorm2;  // per k: L
  std::vector<ExpectationSet> batches;  // populated on the top-level set only

  int second_index(int k, int lp, int kp) const { return (k * L + lp) * K + kp; }

  template <typename Pick>
  MatR entrywise_se(Pick&& pick) const {
    const int nb = static_cast<int>(batches.size());
    MatR se = MatR::Constant(L, L, std::numeric_limits<double>::quiet_NaN());
    if (nb < 4) return se;
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j) {
        cplx mean = 0.0;
        for (const auto& b : batches) mean += pick(b)(i, j);
        mean /= static_cast<double>(nb);
        double var = 0.0;
        for (const auto& b : batches) var += std::norm(pick(b)(i, j) - mean);
        var /= (nb - 1);
        se(i, j) = std::sqrt(var / nb);
      }
    return se;
  }

  /// Mean effective gains of user (lp,k) across BSs.
  VecC b(int lp, int k) const { return gain[static_cast<size_t>(k)].col(lp); }

  /// Pilot-contamination outer products, excluding the serving cell.
  MatC C1(int l, int k, const std::vector<double>& p) const {
    MatC c = MatC::Zero(L, L);
    for (int lp = 0; lp < L; ++lp) {
      if (lp == l) continue;
      const VecC bv = b(lp, k);
      c.noalias() += p[static_cast<size_t>(lp * K + k)] * bv * bv.adjoint();
    }
    return c;
  }

  /// Gain-uncertainty covariance of pilot-sharing users (centered).
  MatC C2(int k, const std::vector<double>& p) const {
    MatC c = MatC::Zero(L, L);
    for (int lp = 0; lp < L; ++lp) {
      const VecC m = b(lp, k);
      c += p[static_cast<size_t>(lp * K + k)] *
           (second[static_cast<size_t>(second_index(k, lp, k))] - m * m.adjoint());
    }
    return 0.5 * (c + MatC(c.adjoint()));
  }

  /// Non-coherent interference from users on other pilots (full matrix).
  MatC C3(int k, const std::vector<double>& p) const {
    MatC c = MatC::Zero(L, L);
    for (int lp = 0; lp < L; ++lp)
      for (int kp = 0; kp < K; ++kp) {
        if (kp == k) continue;
        c += p[static_cast<size_t>(lp * K + kp)] *
             second[static_cast<size_t>(second_index(k, lp, kp))];
      }
    return c;
  }

  /// Combiner-weighted noise, diagonal across BSs.
  MatC C4(int k) const {
    MatC c = MatC::Zero(L, L);
    for (int lpp = 0; lpp < L; ++lpp)
      c(lpp, lpp) = sigma2 * vnorm2[static_cast<size_t>(k)][lpp];
    return c;
  }

  MatC interference(int l, int k, const std::vector<double>& p) const {
    return C1(l, k, p) + C2(k, p) + C3(k, p) + C4(k);
  }

  double sinr(const VecC& a, const std::vector<double>& p, int l, int k) const {
    const double num =
        p[static_cast<size_t>(l * K + k)] * std::norm(a.dot(b(l, k)));
    const double den = (a.adjoint() * interference(l, k, p) * a)(0, 0).real();
    if (den <= 0.0) return 0.0;
    return num / den;
  }

  /// Standard error of the SINR estimate from the batch spread; NaN when
  /// there are too few batches to say anything.
  double sinr_standard_error(const VecC& a, const std::vector<double>& p, int l, int k) const {
    const int nb = static_cast<int>(batches.size());
    if (nb < 4) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    std::vector<double> vals(static_cast<size_t>(nb));
    for (int j = 0; j < nb; ++j) {
      vals[static_cast<size_t>(j)] = batches[static_cast<size_t>(j)].sinr(a, p, l, k);
      mean += vals[static_cast<size_t>(j)];
    }
    mean /= nb;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (nb - 1);
    return std::sqrt(var / nb);
  }

  /// Entrywise standard error of the mean gains (complex spread, from
  /// batch means).
  MatR gain_standard_error(int k) const {
    return entrywise_se([&](const ExpectationSet& b) -> const MatC& {
      return b.gain[static_cast<size_t>(k)];
    });
  }

  /// Entrywise standard error of a second-moment matrix.
  MatR second_standard_error(int k, int lp, int kp) const {
    return entrywise_se([&](const ExpectationSet& b) -> const MatC& {
      return b.second[static_cast<size_t>(b.second_index(k, lp, kp))];
    });
  }
};

struct MonteCarloOptions {
  int batches = 10;
  int threads = 1;
  std::uint64_t stream_salt = 0;
  std::vector<double> data_power_mw;  // RZF weights; empty means p_max
};

namespace detail {

struct MomentSums {
  std::vector<MatC> gain;
  std::vector<MatC> second;
  std::vector<VecR> vnorm2;
  long long n = 0;

  void init(int L, int K) {
    gain.assign(static_cast<size_t>(K), MatC::Zero(L, L));
    second.assign(static_cast<size_t>(K * L * K), MatC::Zero(L, L));
    vnorm2.assign(static_cast<size_t>(K), VecR::Zero(L));
    n = 0;
  }

  void merge(const MomentSums& o) {
    for (size_t i = 0; i < gain.size(); ++i) gain[i] += o.gain[i];
    for (size_t i = 0; i < second.size(); ++i) second[i] += o.second[i];
    for (size_t i = 0; i < vnorm2.size(); ++i) vnorm2[i] += o.vnorm2[i];
    n += o.n;
  }
};

inline void accumulate_block(const Scenario& s, const ChannelSampler& sampler,
                             const MmseEstimator& estimator, const CombinerOptions& copt,
                             const std::vector<double>& powers, std::uint64_t salt,
                             long long block, MomentSums& sums) {
  const int L = s.cells(), K = s.users();
  rng::Engine gen = rng::make_stream(s.config.seed, rng::kBlockDomain, salt,
                                     static_cast<std::uint64_t>(block));
  const ChannelRealization ch = sampler.sample(gen);
  const std::vector<VecC> proj = draw_pilot_projections(s, ch, gen);
  const std::vector<VecC> own = estimator.estimate_own(s, proj);
  const CombinerSet comb = make_combiners(s, own, powers, copt);

  VecC t(L);
  for (int k = 0; k < K; ++k) {
    for (int lpp = 0; lpp < L; ++lpp)
      sums.vnorm2[static_cast<size_t>(k)][lpp] += comb.of(lpp, k).squaredNorm();
    for (int lp = 0; lp < L; ++lp) {
      for (int kp = 0; kp < K; ++kp) {
        for (int lpp = 0; lpp < L; ++lpp) t[lpp] = comb.of(lpp, k).dot(ch.of(lp, kp, lpp));
        sums.second[static_cast<size_t>((k * L + lp) * K + kp)].noalias() += t * t.adjoint();
        if (kp == k) sums.gain[static_cast<size_t>(k)].col(lp) += t;
      }
    }
  }
  ++sums.n;
}

inline ExpectationSet finalize_moments(const MomentSums& sums, const Scenario& s,
                                       cplx combiner_scale) {
  const int L = s.cells(), K = s.users();
  ExpectationSet e;
  e.L = L;
  e.K = K;
  e.sigma2 = s.sigma2;
  e.combiner_scale = combiner_scale;
  e.n_blocks = sums.n;
  const double inv = sums.n > 0 ? 1.0 / static_cast<double>(sums.n) : 0.0;
  e.gain.reserve(sums.gain.size());
  for (const MatC& g : sums.gain) e.gain.push_back(inv * g);
  e.second.reserve(sums.second.size());
  for (const MatC& m : sums.second) e.second.push_back(0.5 * inv * (m + MatC(m.adjoint())));
  e.vnorm2.reserve(sums.vnorm2.size());
  for (const VecR& v : sums.vnorm2) e.vnorm2.push_back(inv * v);
  return e;
}

}  // namespace detail

/// Sample means of all first-layer statistics over independent coherence
/// blocks. Blocks are split into contiguous batches (for standard errors);
/// each block draws from its own substream, so the result is independent of
/// the worker count.
inline ExpectationSet estimate_expectations(const Scenario& s, const CombinerOptions& copt,
                                            long long n_blocks,
                                            const MonteCarloOptions& mc = {}) {
  if (n_blocks < 1) throw std::invalid_argument("estimate_expectations: n_blocks must be >= 1");
  const int L = s.cells(), K = s.users();
  const std::vector<double> powers = mc.data_power_mw.empty() ? s.p_max : mc.data_power_mw;
  if (static_cast<int>(powers.size()) != L * K)
    throw std::invalid_argument("estimate_expectations: bad data power vector");

  const ChannelSampler sampler(s);
  const MmseEstimator estimator(s);

  const int n_batches = static_cast<int>(std::min<long long>(mc.batches, n_blocks));
  std::vector<detail::MomentSums> batch_sums(static_cast<size_t>(n_batches));
  for (auto& b : batch_sums) b.init(L, K);

  auto run_batch = [&](int j) {
    const long long begin = n_blocks * j / n_batches;
    const long long end = n_blocks * (j + 1) / n_batches;
    for (long long i = begin; i < end; ++i)
      detail::accumulate_block(s, sampler, estimator, copt, powers, mc.stream_salt, i,
                               batch_sums[static_cast<size_t>(j)]);
  };

  const int workers = std::max(1, std::min(mc.threads, n_batches));
  if (workers == 1) {
    for (int j = 0; j < n_batches; ++j) run_batch(j);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (int j = next.fetch_add(1); j < n_batches; j = next.fetch_add(1)) run_batch(j);
      });
    for (auto& th : pool) th.join();
  }

  detail::MomentSums total;
  total.init(L, K);
  for (const auto& b : batch_sums) total.merge(b);
  ExpectationSet e = detail::finalize_moments(total, s, copt.scale);
  e.batches.reserve(batch_sums.size());
  for (const auto& b : batch_sums) e.batches.push_back(detail::finalize_moments(b, s, copt.scale));
  return e;
}

/// LSFD vector maximizing the SINR for the sampled statistics:
/// a = (C1+C2+C3+C4)^{-1} b.
inline VecC optimal_lsfd_general(const ExpectationSet& e, const std::vector<double>& p, int l,
                                 int k) {
  const MatC d = e.interference(l, k, p);
  Eigen::SelfAdjointEigenSolver<MatC> es(d);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("optimal_lsfd_general: eigensolver failed");
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmin <= 0.0 || lmax / lmin > 1e12) {
    std::ostringstream msg;
    msg << "optimal_lsfd_general: singular interference matrix (min eig " << lmin
        << ", condition " << (lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity())
        << ")";
    throw std::runtime_error(msg.str());
  }
  const VecC bv = e.b(l, k);
  return es.eigenvectors() *
         (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().adjoint() * bv));
}

inline double se_general(const ExpectationSet& e, const VecC& a, const std::vector<double>& p,
                         int l, int k, int tau_c) {
  return se_from_sinr(e.sinr(a, p, l, k), e.K, tau_c);
}

/// SE via the quadratic form p * b^H (C1+..+C4)^{-1} b, the value attained
/// by the optimal LSFD vector. Used as the second route in identity checks.
inline double se_general_quadratic(const ExpectationSet& e, const std::vector<double>& p, int l,
                                   int k, int tau_c) {
  const MatC d = e.interference(l, k, p);
  const VecC bv = e.b(l, k);
  const double sinr =
      p[static_cast<size_t>(l * e.K + k)] * bv.dot(Eigen::LDLT<MatC>(d).solve(bv)).real();
  return se_from_sinr(sinr, e.K, tau_c);
}

}  // namespace lsfd
