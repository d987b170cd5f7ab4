// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "lsfd/common.hpp"
#include "lsfd/report.hpp"
#include "lsfd/spectral_efficiency.hpp"

namespace lsfd {

// ---------------------------------------------------------------------------
// Joint data-power / LSFD optimization of the network sum SE via the
// weighted-MMSE reformulation. Each user carries four block variables: the
// square-root power rho, the LSFD vector a, the receive coefficient u of
// the equivalent scalar channel, and the MSE weight w. One sweep updates
// u -> w -> a -> rho; every block update is the exact minimizer of the
// surrogate objective sum(w*e - ln w), so the surrogate never increases
// and the sum SE evaluated between sweeps never decreases.
// ---------------------------------------------------------------------------

struct OptimizerConfig {
  double eps = 1e-6;   // convergence threshold on |delta sum SE per cell|
  int max_iters = 500;
  enum class Init { kUniformRandom, kFullPower } init = Init::kUniformRandom;
};

struct OptimizerState {
  int L = 0, K = 0;
  std::vector<double> rho;  // sqrt of data power, (l,k), sqrt(mW)
  std::vector<VecC> a;      // LSFD vectors, (l,k)
  std::vector<cplx> u;      // receive coefficients
  std::vector<double> w;    // MSE weights
  int iterations = 0;
  std::vector<double> sum_se_history;  // per-cell sum SE; entry 0 is the initial point

  int idx(int l, int k) const { return l * K + k; }

  std::vector<double> powers() const {
    std::vector<double> p(rho.size());
    for (size_t i = 0; i < rho.size(); ++i) p[i] = rho[i] * rho[i];
    return p;
  }
};

/// Coherent gain of user (l,k) through its own LSFD vector: a^H b.
inline cplx lsfd_gain(const ClosedFormCoefficients& cf, const OptimizerState& st, int l, int k) {
  const VecC& a = st.a[static_cast<size_t>(st.idx(l, k))];
  cplx s = 0.0;
  for (int lpp = 0; lpp < cf.L; ++lpp) s += std::conj(a[lpp]) * cf.b(l, k, lpp);
  return s;
}

/// Mean square of the two-layer combined observation for user (l,k) before
/// the receive coefficient: coherent terms of all pilot sharers plus
/// power-weighted non-coherent interference plus noise.
inline double combined_output_power(const ClosedFormCoefficients& cf, const OptimizerState& st,
                                    int l, int k) {
  const int L = cf.L, K = cf.K;
  const VecC& a = st.a[static_cast<size_t>(st.idx(l, k))];
  double acc = 0.0;
  for (int lp = 0; lp < L; ++lp) {
    cplx s = 0.0;
    for (int lpp = 0; lpp < L; ++lpp) s += std::conj(a[lpp]) * cf.b(lp, k, lpp);
    const double r = st.rho[static_cast<size_t>(lp * K + k)];
    acc += r * r * std::norm(s);
  }
  for (int lpp = 0; lpp < L; ++lpp) {
    const double a2 = std::norm(a[lpp]);
    if (a2 == 0.0) continue;
    double cw = 0.0;
    for (int lp = 0; lp < L; ++lp)
      for (int kp = 0; kp < K; ++kp) {
        const double r = st.rho[static_cast<size_t>(lp * K + kp)];
        cw += r * r * cf.c(lpp, k, lp, kp);
      }
    acc += a2 * (cw + cf.d(lpp, k));
  }
  return acc;
}

/// MSE of the equivalent scalar detection for user (l,k) at the current
/// state: |u|^2 * E|combined|^2 - 2 rho Re(u a^H b) + 1.
inline double mse_e(const ClosedFormCoefficients& cf, const OptimizerState& st, int l, int k) {
  const cplx u = st.u[static_cast<size_t>(st.idx(l, k))];
  const double rho = st.rho[static_cast<size_t>(st.idx(l, k))];
  return std::norm(u) * combined_output_power(cf, st, l, k) -
         2.0 * rho * (u * lsfd_gain(cf, st, l, k)).real() + 1.0;
}

/// MSE-optimal receive coefficient: rho * conj(a^H b) / E|combined|^2.
inline cplx update_u(const ClosedFormCoefficients& cf, const OptimizerState& st, int l, int k) {
  const double total = combined_output_power(cf, st, l, k);
  if (total <= 0.0) return 0.0;  // degenerate all-zero LSFD
  return st.rho[static_cast<size_t>(st.idx(l, k))] * std::conj(lsfd_gain(cf, st, l, k)) / total;
}

inline double update_w(double e_value) {
  if (e_value <= 0.0) {
    std::ostringstream msg;
    msg << "update_w: nonpositive MSE " << e_value << " indicates numerical corruption";
    throw std::runtime_error(msg.str());
  }
  return 1.0 / e_value;
}

/// Exact minimizer of the weighted MSE over the LSFD vector for fixed
/// (u, rho): (rho u / |u|^2) * Ctilde^{-1} b, with Ctilde the full coherent
/// outer-product sum plus the diagonal of power-weighted c sums and d.
/// Leaves a unchanged when u = 0.
inline VecC update_a(const ClosedFormCoefficients& cf, const OptimizerState& st, int l, int k) {
  const cplx u = st.u[static_cast<size_t>(st.idx(l, k))];
  if (u == cplx(0.0)) return st.a[static_cast<size_t>(st.idx(l, k))];
  const int L = cf.L, K = cf.K;
  MatR ctilde = MatR::Zero(L, L);
  for (int lp = 0; lp < L; ++lp) {
    const double r = st.rho[static_cast<size_t>(lp * K + k)];
    const VecR bv = cf.b_vec(lp, k);
    ctilde.noalias() += r * r * bv * bv.transpose();
  }
  for (int i = 0; i < L; ++i) {
    double acc = cf.d(i, k);
    for (int lp = 0; lp < L; ++lp)
      for (int kp = 0; kp < K; ++kp) {
        const double r = st.rho[static_cast<size_t>(lp * K + kp)];
        acc += r * r * cf.c(i, k, lp, kp);
      }
    ctilde(i, i) += acc;
  }
  Eigen::LLT<MatR> llt(ctilde);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("update_a: normal matrix not positive definite");
  const VecR x = llt.solve(cf.b_vec(l, k));
  // rho * u / |u|^2 written as rho / conj(u); the squared form underflows
  // when a user's power has decayed through many sweeps.
  const cplx coef = st.rho[static_cast<size_t>(st.idx(l, k))] / std::conj(u);
  return coef * x.cast<cplx>();
}

/// Power update: ratio of the weighted own gain to the total weighted
/// sensitivity of all users to this power, clamped to [0, sqrt(P_max)].
inline double update_rho(const ClosedFormCoefficients& cf, const OptimizerState& st,
                         const std::vector<double>& p_max, int l, int k) {
  const int L = cf.L, K = cf.K;
  const double cap = std::sqrt(p_max[static_cast<size_t>(l * K + k)]);
  const cplx u_own = st.u[static_cast<size_t>(st.idx(l, k))];
  const double num = st.w[static_cast<size_t>(st.idx(l, k))] *
                     (u_own * lsfd_gain(cf, st, l, k)).real();
  double den = 0.0;
  for (int lp = 0; lp < L; ++lp) {
    const cplx u2 = st.u[static_cast<size_t>(lp * K + k)];
    if (u2 == cplx(0.0)) continue;
    const VecC& a2 = st.a[static_cast<size_t>(lp * K + k)];
    cplx s = 0.0;
    for (int lpp = 0; lpp < L; ++lpp) s += std::conj(a2[lpp]) * cf.b(l, k, lpp);
    den += st.w[static_cast<size_t>(lp * K + k)] * std::norm(u2) * std::norm(s);
  }
  for (int lp = 0; lp < L; ++lp)
    for (int kp = 0; kp < K; ++kp) {
      const cplx u2 = st.u[static_cast<size_t>(lp * K + kp)];
      if (u2 == cplx(0.0)) continue;
      const VecC& a2 = st.a[static_cast<size_t>(lp * K + kp)];
      double sens = 0.0;
      for (int lpp = 0; lpp < L; ++lpp) sens += std::norm(a2[lpp]) * cf.c(lpp, kp, l, k);
      den += st.w[static_cast<size_t>(lp * K + kp)] * std::norm(u2) * sens;
    }
  if (den <= 0.0) return cap;  // unconstrained direction
  return std::clamp(num / den, 0.0, cap);
}

inline double sum_se_per_cell(const ClosedFormCoefficients& cf, const std::vector<double>& p,
                              const std::vector<VecC>& a) {
  double acc = 0.0;
  for (int l = 0; l < cf.L; ++l)
    for (int k = 0; k < cf.K; ++k)
      acc += se_from_sinr(sinr_closed_form(cf, p, a[static_cast<size_t>(l * cf.K + k)], l, k),
                          cf.K, cf.tau_c);
  return acc / cf.L;
}

struct OptimizeOutcome {
  SeReport report;
  OptimizerState state;
};

namespace detail {

inline SeReport report_from_state(const ClosedFormCoefficients& cf, const OptimizerState& st) {
  SeReport rep;
  rep.L = cf.L;
  rep.K = cf.K;
  rep.tau_c = cf.tau_c;
  rep.prelog = se_prelog(cf.K, cf.tau_c);
  const std::vector<double> p = st.powers();
  for (int l = 0; l < cf.L; ++l)
    for (int k = 0; k < cf.K; ++k) {
      SeUserEntry e;
      e.cell = l;
      e.user = k;
      e.power_mw = p[static_cast<size_t>(l * cf.K + k)];
      e.lsfd = st.a[static_cast<size_t>(l * cf.K + k)];
      e.sinr = sinr_closed_form(cf, p, e.lsfd, l, k);
      e.se = se_from_sinr(e.sinr, cf.K, cf.tau_c);
      rep.users.push_back(std::move(e));
    }
  return rep;
}

inline OptimizeOutcome run_wmmse(const ClosedFormCoefficients& cf,
                                 const std::vector<double>& p_max, std::vector<double> rho0,
                                 const OptimizerConfig& config, bool two_layer) {
  const int L = cf.L, K = cf.K;
  if (static_cast<int>(p_max.size()) != L * K)
    throw std::invalid_argument("maximize_sum_se: bad p_max vector");
  if (config.eps <= 0.0 || config.max_iters < 1)
    throw std::invalid_argument("maximize_sum_se: bad optimizer config");

  OptimizerState st;
  st.L = L;
  st.K = K;
  st.rho = std::move(rho0);
  st.u.assign(static_cast<size_t>(L * K), cplx(0.0));
  st.w.assign(static_cast<size_t>(L * K), 1.0);
  st.a.resize(static_cast<size_t>(L * K));
  {
    const std::vector<double> p = st.powers();
    for (int l = 0; l < L; ++l)
      for (int k = 0; k < K; ++k)
        st.a[static_cast<size_t>(l * K + k)] =
            two_layer ? optimal_lsfd_closed_form(cf, p, l, k).a : single_layer_lsfd(L, l);
  }
  st.sum_se_history.push_back(sum_se_per_cell(cf, st.powers(), st.a));

  std::vector<double> tilde(static_cast<size_t>(L * K));
  std::vector<double> rho_next(static_cast<size_t>(L * K));
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    // Receive coefficients; the combined output power is cached for the
    // weight update, which uses the same (rho, a).
    for (int l = 0; l < L; ++l)
      for (int k = 0; k < K; ++k) {
        const int i = st.idx(l, k);
        tilde[static_cast<size_t>(i)] = combined_output_power(cf, st, l, k);
        st.u[static_cast<size_t>(i)] =
            tilde[static_cast<size_t>(i)] > 0.0
                ? st.rho[static_cast<size_t>(i)] * std::conj(lsfd_gain(cf, st, l, k)) /
                      tilde[static_cast<size_t>(i)]
                : cplx(0.0);
      }
    // Weights.
    for (int l = 0; l < L; ++l)
      for (int k = 0; k < K; ++k) {
        const int i = st.idx(l, k);
        const double e = std::norm(st.u[static_cast<size_t>(i)]) * tilde[static_cast<size_t>(i)] -
                         2.0 * st.rho[static_cast<size_t>(i)] *
                             (st.u[static_cast<size_t>(i)] * lsfd_gain(cf, st, l, k)).real() +
                         1.0;
        st.w[static_cast<size_t>(i)] = update_w(e);
      }
    // LSFD vectors.
    if (two_layer)
      for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k)
          st.a[static_cast<size_t>(st.idx(l, k))] = update_a(cf, st, l, k);
    // Powers: simultaneous update; the surrogate is separable in rho, so
    // the joint update equals the per-coordinate minimizers.
    for (int l = 0; l < L; ++l)
      for (int k = 0; k < K; ++k)
        rho_next[static_cast<size_t>(st.idx(l, k))] = update_rho(cf, st, p_max, l, k);
    st.rho = rho_next;

    const double se = sum_se_per_cell(cf, st.powers(), st.a);
    const double prev = st.sum_se_history.back();
    st.sum_se_history.push_back(se);
    st.iterations = iter;
    if (se < prev - 1e-6) {
      std::ostringstream msg;
      msg << "maximize_sum_se: sum SE decreased from " << prev << " to " << se
          << " at sweep " << iter << " (update-equation bug); rho =";
      for (double r : st.rho) msg << ' ' << r;
      throw std::runtime_error(msg.str());
    }
    if (std::abs(se - prev) <= config.eps) break;
  }

  // Terminal refresh of the detection variables so that w - 1 equals the
  // SINR of the final (rho, a) point.
  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k) {
      const int i = st.idx(l, k);
      st.u[static_cast<size_t>(i)] = update_u(cf, st, l, k);
      st.w[static_cast<size_t>(i)] = update_w(mse_e(cf, st, l, k));
    }

  OptimizeOutcome out;
  out.report = report_from_state(cf, st);
  out.state = std::move(st);
  return out;
}

inline std::vector<double> initial_rho(const std::vector<double>& p_max,
                                       OptimizerConfig::Init init, rng::Engine* gen) {
  std::vector<double> rho(p_max.size());
  if (init == OptimizerConfig::Init::kUniformRandom) {
    if (gen == nullptr)
      throw std::invalid_argument("maximize_sum_se: random init needs an engine");
    // initial data powers uniform over the feasible set [0, P_max]
    for (size_t i = 0; i < p_max.size(); ++i) {
      std::uniform_real_distribution<double> unif(0.0, p_max[i]);
      rho[i] = std::sqrt(unif(*gen));
    }
  } else {
    for (size_t i = 0; i < p_max.size(); ++i) rho[i] = std::sqrt(p_max[i]);
  }
  return rho;
}

}  // namespace detail

/// Runs the block-coordinate sweeps until the per-cell sum SE changes by at
/// most `eps` or `max_iters` sweeps have been performed. The LSFD vectors
/// start from the closed-form optimum at the initial powers.
inline OptimizeOutcome maximize_sum_se(const ClosedFormCoefficients& cf,
                                       const std::vector<double>& p_max,
                                       const OptimizerConfig& config, rng::Engine& gen) {
  return detail::run_wmmse(cf, p_max, detail::initial_rho(p_max, config.init, &gen), config,
                           /*two_layer=*/true);
}

/// Warm start from explicit sqrt-power values.
inline OptimizeOutcome maximize_sum_se_from(const ClosedFormCoefficients& cf,
                                            const std::vector<double>& p_max,
                                            std::vector<double> rho0,
                                            const OptimizerConfig& config) {
  return detail::run_wmmse(cf, p_max, std::move(rho0), config, /*two_layer=*/true);
}

/// Same iteration with the LSFD vectors frozen at the own-cell selector;
/// only u, w and rho are updated.
inline OptimizeOutcome maximize_sum_se_single_layer(const ClosedFormCoefficients& cf,
                                                    const std::vector<double>& p_max,
                                                    const OptimizerConfig& config,
                                                    rng::Engine* gen = nullptr) {
  OptimizerConfig c = config;
  if (gen == nullptr) c.init = OptimizerConfig::Init::kFullPower;
  return detail::run_wmmse(cf, p_max, detail::initial_rho(p_max, c.init, gen), c,
                           /*two_layer=*/false);
}

inline OptimizeOutcome maximize_sum_se_single_layer_from(const ClosedFormCoefficients& cf,
                                                         const std::vector<double>& p_max,
                                                         std::vector<double> rho0,
                                                         const OptimizerConfig& config) {
  return detail::run_wmmse(cf, p_max, std::move(rho0), config, /*two_layer=*/false);
}

}  // namespace lsfd
