// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lsfd/channel.hpp"
#include "lsfd/common.hpp"
#include "lsfd/scenario.hpp"

namespace lsfd {

enum class CombinerScheme { kMrc, kZf, kRzf };

inline const char* combiner_name(CombinerScheme s) {
  switch (s) {
    case CombinerScheme::kMrc: return "mrc";
    case CombinerScheme::kZf: return "zf";
    case CombinerScheme::kRzf: return "rzf";
  }
  return "?";
}

struct CombinerOptions {
  CombinerScheme scheme = CombinerScheme::kMrc;
  bool rzf_power_weights = true;  // weight estimate outer products by data power
  cplx scale = 1.0;               // uniform rescaling; SINR-invariant
};

/// First-layer decoding vectors v_{l,k} for every BS and own-cell user.
struct CombinerSet {
  CombinerScheme scheme = CombinerScheme::kMrc;
  int L = 0, K = 0;
  std::vector<VecC> v;  // (l,k)

  const VecC& of(int l, int k) const { return v[static_cast<size_t>(l * K + k)]; }
};

/// Maximum ratio: v equals the local channel estimate.
inline VecC mrc(const VecC& h_hat) { return h_hat; }

/// Zero forcing within the cell: columns of Hhat (Hhat^H Hhat)^{-1}, so that
/// v_k^H hhat_{k'} = delta_{kk'}. Requires M >= K and full column rank.
inline std::vector<VecC> zf_cell(const std::vector<VecC>& est_cell) {
  const int K = static_cast<int>(est_cell.size());
  if (K == 0) throw std::invalid_argument("zf_cell: no estimates");
  const int M = static_cast<int>(est_cell[0].size());
  if (M < K) throw std::invalid_argument("zf_cell: needs M >= K");
  MatC hhat(M, K);
  for (int k = 0; k < K; ++k) hhat.col(k) = est_cell[static_cast<size_t>(k)];
  const MatC gram = hhat.adjoint() * hhat;
  Eigen::FullPivLU<MatC> lu(gram);
  if (!lu.isInvertible())
    throw std::invalid_argument("zf_cell: estimate matrix is rank deficient");
  const MatC vmat = hhat * lu.inverse();
  std::vector<VecC> v(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) v[static_cast<size_t>(k)] = vmat.col(k);
  return v;
}

/// Regularized zero forcing with the local estimates:
/// v_k = (sum_k' p_k' hhat_k' hhat_k'^H + sigma^2 I)^{-1} hhat_k.
/// With `weights` empty the outer products are unweighted.
inline std::vector<VecC> rzf_cell(const std::vector<VecC>& est_cell,
                                  const std::vector<double>& weights, double sigma2) {
  const int K = static_cast<int>(est_cell.size());
  if (K == 0) throw std::invalid_argument("rzf_cell: no estimates");
  const int M = static_cast<int>(est_cell[0].size());
  MatC a = sigma2 * MatC::Identity(M, M);
  for (int k = 0; k < K; ++k) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<size_t>(k)];
    a.noalias() += w * est_cell[static_cast<size_t>(k)] * est_cell[static_cast<size_t>(k)].adjoint();
  }
  Eigen::LLT<MatC> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("rzf_cell: regularized Gram matrix not PD");
  std::vector<VecC> v(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) v[static_cast<size_t>(k)] = llt.solve(est_cell[static_cast<size_t>(k)]);
  return v;
}

/// Builds the whole first layer from own-cell estimates. `data_power_mw`
/// feeds the RZF weights; pass the power is actually transmitted with.
inline CombinerSet make_combiners(const Scenario& s, const std::vector<VecC>& own_estimates,
                                  const std::vector<double>& data_power_mw,
                                  const CombinerOptions& opt) {
  const int L = s.cells(), K = s.users();
  CombinerSet set;
  set.scheme = opt.scheme;
  set.L = L;
  set.K = K;
  set.v.resize(static_cast<size_t>(L * K));
  for (int l = 0; l < L; ++l) {
    std::vector<VecC> cell(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) cell[static_cast<size_t>(k)] = own_estimates[static_cast<size_t>(l * K + k)];
    std::vector<VecC> v;
    switch (opt.scheme) {
      case CombinerScheme::kMrc:
        v = cell;
        break;
      case CombinerScheme::kZf:
        v = zf_cell(cell);
        break;
      case CombinerScheme::kRzf: {
        std::vector<double> w;
        if (opt.rzf_power_weights) {
          w.resize(static_cast<size_t>(K));
          for (int k = 0; k < K; ++k)
            w[static_cast<size_t>(k)] =
                data_power_mw.empty() ? s.p_max_of(l, k)
                                      : data_power_mw[static_cast<size_t>(l * K + k)];
        }
        v = rzf_cell(cell, w, s.sigma2);
        break;
      }
    }
    for (int k = 0; k < K; ++k) set.v[static_cast<size_t>(l * K + k)] = opt.scale * v[static_cast<size_t>(k)];
  }
  return set;
}

}  // namespace lsfd
