// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lsfd/common.hpp"

namespace lsfd {

/// Network-level parameters of a multi-cell Massive MIMO uplink.
///
/// The JSON representation uses the short field names below ("L", "K", "M",
/// "tau_c", ...); all keys are optional and default to the values here.
struct NetworkConfig {
  int num_cells = 4;              // L
  int users_per_cell = 5;         // K, also the pilot count per cell
  int num_antennas = 200;         // M
  int coherence_block_len = 200;  // tau_c, channel uses per coherence block
  double cell_edge_m = 500.0;     // side length of a square cell
  double min_dist_m = 35.0;       // minimum user-to-serving-BS distance
  double varsigma = 0.5;          // antenna correlation magnitude in [0,1]
  double shadow_std_db = 7.0;
  double noise_dbm = -96.0;
  double noise_figure_db = 5.0;
  double pilot_power_mw = 200.0;  // per pilot symbol
  double p_max_mw = 200.0;        // per-user data power cap
  double bandwidth_hz = 20e6;     // reporting only
  std::uint64_t seed = 1;

  void validate() const {
    if (num_cells < 1) throw std::invalid_argument("config: L must be >= 1");
    if (users_per_cell < 1 || users_per_cell > coherence_block_len)
      throw std::invalid_argument("config: need 1 <= K <= tau_c");
    if (num_antennas < 1) throw std::invalid_argument("config: M must be >= 1");
    if (varsigma < 0.0 || varsigma > 1.0)
      throw std::invalid_argument("config: varsigma must lie in [0,1]");
    if (pilot_power_mw <= 0.0 || p_max_mw <= 0.0)
      throw std::invalid_argument("config: powers must be positive");
    if (min_dist_m <= 0.0) throw std::invalid_argument("config: min_dist_m must be positive");
    if (cell_edge_m <= 0.0) throw std::invalid_argument("config: cell_edge_m must be positive");
  }
};

inline NetworkConfig config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.num_cells = j.value("L", c.num_cells);
  c.users_per_cell = j.value("K", c.users_per_cell);
  c.num_antennas = j.value("M", c.num_antennas);
  c.coherence_block_len = j.value("tau_c", c.coherence_block_len);
  c.cell_edge_m = j.value("cell_edge_m", c.cell_edge_m);
  c.min_dist_m = j.value("min_dist_m", c.min_dist_m);
  c.varsigma = j.value("varsigma", c.varsigma);
  c.shadow_std_db = j.value("shadow_std_db", c.shadow_std_db);
  c.noise_dbm = j.value("noise_dbm", c.noise_dbm);
  c.noise_figure_db = j.value("noise_figure_db", c.noise_figure_db);
  c.pilot_power_mw = j.value("pilot_power_mw", c.pilot_power_mw);
  c.p_max_mw = j.value("p_max_mw", c.p_max_mw);
  c.bandwidth_hz = j.value("bandwidth_hz", c.bandwidth_hz);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline nlohmann::json config_to_json(const NetworkConfig& c) {
  return nlohmann::json{{"L", c.num_cells},
                        {"K", c.users_per_cell},
                        {"M", c.num_antennas},
                        {"tau_c", c.coherence_block_len},
                        {"cell_edge_m", c.cell_edge_m},
                        {"min_dist_m", c.min_dist_m},
                        {"varsigma", c.varsigma},
                        {"shadow_std_db", c.shadow_std_db},
                        {"noise_dbm", c.noise_dbm},
                        {"noise_figure_db", c.noise_figure_db},
                        {"pilot_power_mw", c.pilot_power_mw},
                        {"p_max_mw", c.p_max_mw},
                        {"bandwidth_hz", c.bandwidth_hz},
                        {"seed", c.seed}};
}

/// 3GPP-style pathloss at `distance_m` meters plus a shadow-fading term.
inline double pathloss_db(double distance_m, double shadow_db) {
  if (distance_m <= 0.0) throw std::invalid_argument("pathloss_db: distance must be positive");
  return -148.1 - 37.6 * std::log10(distance_m / 1000.0) + shadow_db;
}

/// Effective noise power in mW for a given noise variance (dBm) and noise
/// figure (dB); the figure adds to the variance in dB scale.
inline double effective_noise_mw(double noise_dbm, double noise_figure_db) {
  return std::pow(10.0, (noise_dbm + noise_figure_db - 30.0) / 10.0) * 1000.0;
}

/// Exponential correlation model of a uniform linear array: entry (m,n) is
/// beta * (varsigma * e^{j*theta})^{m-n} for m >= n and the conjugate below
/// the diagonal. theta is the user's incidence angle to the array.
inline MatC exp_correlation(int m_antennas, double varsigma, double theta, double beta) {
  if (varsigma < 0.0 || varsigma > 1.0)
    throw std::invalid_argument("exp_correlation: varsigma must lie in [0,1]");
  if (beta <= 0.0) throw std::invalid_argument("exp_correlation: beta must be positive");
  std::vector<cplx> pow_cache(static_cast<size_t>(m_antennas));
  const cplx base = varsigma * std::polar(1.0, theta);
  cplx acc = 1.0;
  for (int p = 0; p < m_antennas; ++p) {
    pow_cache[static_cast<size_t>(p)] = acc;
    acc *= base;
  }
  MatC r(m_antennas, m_antennas);
  for (int mm = 0; mm < m_antennas; ++mm) {
    r(mm, mm) = beta;
    for (int nn = 0; nn < mm; ++nn) {
      const cplx v = beta * pow_cache[static_cast<size_t>(mm - nn)];
      r(mm, nn) = v;
      r(nn, mm) = std::conj(v);
    }
  }
  return r;
}

// Shortest signed displacement on a circle of circumference `extent`.
inline double wrap_delta(double delta, double extent) {
  delta = std::remainder(delta, extent);
  return delta;
}

inline double torus_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                             double extent_x, double extent_y) {
  const double dx = wrap_delta(a.x() - b.x(), extent_x);
  const double dy = wrap_delta(a.y() - b.y(), extent_y);
  return std::hypot(dx, dy);
}

/// One drop of the network: geometry, large-scale fading and spatial
/// correlation matrices for every (user, BS) link, plus power and noise
/// figures in linear scale.
struct Scenario {
  NetworkConfig config;
  int grid_x = 1;  // cells per row; cells are laid out on a wrapped grid
  int grid_y = 1;
  std::vector<Eigen::Vector2d> bs_pos;            // per cell
  std::vector<Eigen::Vector2d> user_pos;          // (l,k)
  std::vector<double> beta_lin;                   // (l,k,l') linear gain
  std::vector<MatC> corr;                         // (l,k,l') MxM
  std::vector<double> pilot_power;                // (l,k) mW
  std::vector<double> p_max;                      // (l,k) mW
  double sigma2 = 0.0;                            // mW

  int cells() const { return config.num_cells; }
  int users() const { return config.users_per_cell; }
  int antennas() const { return config.num_antennas; }
  double extent_x() const { return grid_x * config.cell_edge_m; }
  double extent_y() const { return grid_y * config.cell_edge_m; }

  int user_index(int l, int k) const { return l * config.users_per_cell + k; }
  int link_index(int l, int k, int bs) const {
    return (l * config.users_per_cell + k) * config.num_cells + bs;
  }

  double beta(int l, int k, int bs) const { return beta_lin[static_cast<size_t>(link_index(l, k, bs))]; }
  const MatC& R(int l, int k, int bs) const { return corr[static_cast<size_t>(link_index(l, k, bs))]; }
  double pilot_power_of(int l, int k) const { return pilot_power[static_cast<size_t>(user_index(l, k))]; }
  double p_max_of(int l, int k) const { return p_max[static_cast<size_t>(user_index(l, k))]; }
};

namespace detail {

// Largest factor of n not exceeding sqrt(n); gives the most square grid.
inline std::pair<int, int> grid_dims(int n_cells) {
  int nx = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_cells))));
  while (nx > 1 && n_cells % nx != 0) --nx;
  return {nx, n_cells / nx};
}

}  // namespace detail

/// Generates one reproducible drop. Users are placed uniformly in their
/// square cell, re-sampled until they are at least `min_dist_m` away from
/// the serving BS; all distances and incidence angles use the wrap-around
/// (torus) metric. Pure function of (config, drop_index).
inline Scenario generate_scenario(const NetworkConfig& config, int drop_index) {
  config.validate();
  const int L = config.num_cells;
  const int K = config.users_per_cell;

  Scenario s;
  s.config = config;
  auto [gx, gy] = detail::grid_dims(L);
  s.grid_x = gx;
  s.grid_y = gy;
  const double edge = config.cell_edge_m;

  s.bs_pos.resize(static_cast<size_t>(L));
  for (int l = 0; l < L; ++l) {
    const int ix = l % gx;
    const int iy = l / gx;
    s.bs_pos[static_cast<size_t>(l)] = {(ix + 0.5) * edge, (iy + 0.5) * edge};
  }

  rng::Engine gen = rng::make_stream(config.seed, rng::kScenarioDomain,
                                     static_cast<std::uint64_t>(drop_index));
  std::uniform_real_distribution<double> unif(0.0, edge);

  s.user_pos.resize(static_cast<size_t>(L * K));
  for (int l = 0; l < L; ++l) {
    const Eigen::Vector2d origin{(l % gx) * edge, (l / gx) * edge};
    for (int k = 0; k < K; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000; ++attempt) {
        const Eigen::Vector2d pos = origin + Eigen::Vector2d{unif(gen), unif(gen)};
        if (torus_distance(pos, s.bs_pos[static_cast<size_t>(l)], s.extent_x(), s.extent_y()) >=
            config.min_dist_m) {
          s.user_pos[static_cast<size_t>(s.user_index(l, k))] = pos;
          placed = true;
          break;
        }
      }
      if (!placed)
        throw std::invalid_argument(
            "generate_scenario: could not place user at min_dist_m; cell too small");
    }
  }

  s.sigma2 = effective_noise_mw(config.noise_dbm, config.noise_figure_db);
  s.pilot_power.assign(static_cast<size_t>(L * K), config.pilot_power_mw);
  s.p_max.assign(static_cast<size_t>(L * K), config.p_max_mw);

  std::normal_distribution<double> shadow(0.0, config.shadow_std_db);
  s.beta_lin.resize(static_cast<size_t>(L * K * L));
  s.corr.resize(static_cast<size_t>(L * K * L));
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < K; ++k) {
      const Eigen::Vector2d& up = s.user_pos[static_cast<size_t>(s.user_index(l, k))];
      for (int bs = 0; bs < L; ++bs) {
        const Eigen::Vector2d& bp = s.bs_pos[static_cast<size_t>(bs)];
        const double dx = wrap_delta(up.x() - bp.x(), s.extent_x());
        const double dy = wrap_delta(up.y() - bp.y(), s.extent_y());
        const double dist = std::hypot(dx, dy);
        const double z = shadow(gen);  // independent per (user, BS) link
        const double beta = db_to_linear(pathloss_db(dist, z));
        const double theta = std::atan2(dy, dx);
        s.beta_lin[static_cast<size_t>(s.link_index(l, k, bs))] = beta;
        s.corr[static_cast<size_t>(s.link_index(l, k, bs))] =
            exp_correlation(config.num_antennas, config.varsigma, theta, beta);
      }
    }
  }
  return s;
}

/// Checks the statistical invariants of a scenario's correlation matrices:
/// Hermitian within 1e-10, PSD within -1e-8 * trace/M, trace/M equal to the
/// large-scale coefficient within 1e-9 relative.
inline void validate_correlation(const Scenario& s) {
  for (int l = 0; l < s.cells(); ++l) {
    for (int k = 0; k < s.users(); ++k) {
      for (int bs = 0; bs < s.cells(); ++bs) {
        const MatC& r = s.R(l, k, bs);
        const double beta = s.beta(l, k, bs);
        if (beta <= 0.0) throw std::runtime_error("scenario: nonpositive beta");
        if (hermitian_error(r) > 1e-10) throw std::runtime_error("scenario: R not Hermitian");
        const double tr = r.trace().real();
        if (std::abs(tr / s.antennas() - beta) > 1e-9 * beta)
          throw std::runtime_error("scenario: trace(R)/M != beta");
        if (min_eigenvalue(r) < -1e-8 * tr / s.antennas())
          throw std::runtime_error("scenario: R not PSD");
      }
    }
  }
}

}  // namespace lsfd
