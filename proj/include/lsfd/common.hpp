// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace lsfd {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

// Unit convention: every power inside the library is milliwatt, every gain
// is linear. dB and dBm show up only at configuration and I/O boundaries.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// tr(A*B) without forming the product.
inline cplx trace_product(const MatC& a, const MatC& b) {
  return a.transpose().cwiseProduct(b).sum();
}

inline double hermitian_error(const MatC& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

// Smallest eigenvalue of a (numerically) Hermitian matrix.
inline double min_eigenvalue(const MatC& a) {
  Eigen::SelfAdjointEigenSolver<MatC> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Fixed domain tags so independent consumers of the master seed never
// share a stream.
inline constexpr std::uint64_t kScenarioDomain = 0x5ce7a110u;
inline constexpr std::uint64_t kBlockDomain = 0xb10c0bb5u;
inline constexpr std::uint64_t kOptimizerInitDomain = 0x09071a17u;
inline constexpr std::uint64_t kProbeDomain = 0x9a0be077u;

// Derives a well-separated engine from (seed, domain, a, b). Used for
// per-drop and per-coherence-block substreams, which makes parallel
// generation independent of the worker schedule.
inline Engine make_stream(std::uint64_t seed, std::uint64_t domain,
                          std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s ^= domain;
  h ^= splitmix64(s);
  s ^= a;
  h ^= splitmix64(s);
  s ^= b;
  h ^= splitmix64(s);
  return Engine(h);
}

inline double normal(Engine& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(g);
}

// One CN(0,1) sample: independent real/imaginary parts with variance 1/2.
inline cplx cnormal(Engine& g) {
  std::normal_distribution<double> n(0.0, M_SQRT1_2);
  const double re = n(g);
  const double im = n(g);
  return {re, im};
}

inline VecC cnormal_vector(Eigen::Index m, Engine& g) {
  VecC v(m);
  for (Eigen::Index i = 0; i < m; ++i) v[i] = cnormal(g);
  return v;
}

}  // namespace rng
}  // namespace lsfd
