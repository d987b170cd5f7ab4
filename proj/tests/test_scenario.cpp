// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "lsfd/scenario.hpp"

using namespace lsfd;

TEST_CASE("pathloss formula") {
  CHECK(pathloss_db(1000.0, 0.0) == Catch::Approx(-148.1).margin(1e-12));
  CHECK(pathloss_db(100.0, 0.0) == Catch::Approx(-110.5).margin(1e-9));
  CHECK(pathloss_db(1000.0, 3.0) == Catch::Approx(-145.1).margin(1e-12));
  CHECK_THROWS_AS(pathloss_db(0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pathloss_db(-5.0, 0.0), std::invalid_argument);
}

TEST_CASE("pathloss strictly decreasing in distance") {
  rng::Engine gen(123);
  std::uniform_real_distribution<double> unif(1.0, 5000.0);
  for (int i = 0; i < 200; ++i) {
    double d1 = unif(gen), d2 = unif(gen);
    if (d1 > d2) std::swap(d1, d2);
    if (d1 == d2) continue;
    CHECK(pathloss_db(d1, 1.3) > pathloss_db(d2, 1.3));
  }
}

TEST_CASE("effective noise power") {
  CHECK(effective_noise_mw(-96.0, 5.0) == Catch::Approx(std::pow(10.0, -9.1)).epsilon(1e-12));
  CHECK(effective_noise_mw(0.0, 0.0) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(effective_noise_mw(-96.0, 0.0) == Catch::Approx(std::pow(10.0, -9.6)).epsilon(1e-12));
}

TEST_CASE("exponential correlation model entries") {
  const MatC id = exp_correlation(2, 0.0, 1.0, 1.0);
  CHECK((id - MatC::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

  const MatC r = exp_correlation(2, 0.5, 0.0, 1.0);
  CHECK(r(0, 0).real() == Catch::Approx(1.0));
  CHECK(r(1, 0).real() == Catch::Approx(0.5));
  CHECK(r(0, 1).real() == Catch::Approx(0.5));
  CHECK(std::abs(r(1, 0).imag()) < 1e-15);

  const MatC r3 = exp_correlation(3, 0.8, M_PI / 2.0, 2.0);
  for (int i = 0; i < 3; ++i) CHECK(r3(i, i).real() == Catch::Approx(2.0));
  CHECK(std::abs(r3(1, 0) - cplx(0.0, 2.0 * 0.8)) < 1e-12);
  CHECK(std::abs(r3(2, 0) - 2.0 * 0.64 * std::polar(1.0, M_PI)) < 1e-12);

  CHECK_THROWS_AS(exp_correlation(2, 1.5, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(exp_correlation(2, -0.1, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("exponential correlation is Hermitian PSD with trace M*beta") {
  rng::Engine gen(77);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  for (int i = 0; i < 50; ++i) {
    const int m = 2 + static_cast<int>(u01(gen) * 7);
    const double vs = u01(gen);
    const double beta = 0.1 + 10.0 * u01(gen);
    const MatC r = exp_correlation(m, vs, angle(gen), beta);
    CHECK(hermitian_error(r) < 1e-12);
    CHECK(std::abs(r.trace().real() - m * beta) < 1e-9 * m * beta);
    CHECK(min_eigenvalue(r) > -1e-8 * beta);
  }
}

TEST_CASE("torus metric") {
  // Points at x=10 and x=990 on a 1000 m wrap are 20 m apart.
  const Eigen::Vector2d a{10.0, 0.0}, b{990.0, 0.0};
  CHECK(torus_distance(a, b, 1000.0, 1000.0) == Catch::Approx(20.0));
  CHECK(torus_distance(b, a, 1000.0, 1000.0) == Catch::Approx(20.0));

  rng::Engine gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1000.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d p{unif(gen), unif(gen)}, q{unif(gen), unif(gen)};
    const double dpq = torus_distance(p, q, 1000.0, 1000.0);
    CHECK(dpq == Catch::Approx(torus_distance(q, p, 1000.0, 1000.0)));
    CHECK(dpq <= (p - q).norm() + 1e-12);
  }
}

TEST_CASE("scenario generation respects the minimum distance") {
  NetworkConfig cfg;
  cfg.seed = 1;
  const Scenario s = generate_scenario(cfg, 0);
  REQUIRE(static_cast<int>(s.user_pos.size()) == 20);
  for (int l = 0; l < s.cells(); ++l)
    for (int k = 0; k < s.users(); ++k) {
      const double d = torus_distance(s.user_pos[static_cast<size_t>(s.user_index(l, k))],
                                      s.bs_pos[static_cast<size_t>(l)], s.extent_x(),
                                      s.extent_y());
      CHECK(d >= cfg.min_dist_m);
    }
}

TEST_CASE("scenario generation is a pure function of (config, drop)") {
  NetworkConfig cfg;
  cfg.num_antennas = 8;
  cfg.users_per_cell = 2;
  const Scenario a = generate_scenario(cfg, 3);
  const Scenario b = generate_scenario(cfg, 3);
  const Scenario c = generate_scenario(cfg, 4);
  REQUIRE(a.user_pos.size() == b.user_pos.size());
  bool same_as_c = true;
  for (size_t i = 0; i < a.user_pos.size(); ++i) {
    CHECK(a.user_pos[i] == b.user_pos[i]);  // bit identical
    same_as_c = same_as_c && a.user_pos[i] == c.user_pos[i];
  }
  for (size_t i = 0; i < a.beta_lin.size(); ++i) CHECK(a.beta_lin[i] == b.beta_lin[i]);
  for (size_t i = 0; i < a.corr.size(); ++i) CHECK(a.corr[i] == b.corr[i]);
  CHECK_FALSE(same_as_c);
}

TEST_CASE("generated correlation matrices satisfy the statistical invariants") {
  NetworkConfig cfg;
  cfg.num_antennas = 16;
  cfg.users_per_cell = 2;
  cfg.varsigma = 0.9;
  validate_correlation(generate_scenario(cfg, 1));
}

TEST_CASE("degenerate geometry is a configuration error") {
  NetworkConfig cfg;
  cfg.min_dist_m = 400.0;  // unreachable inside a 500 m cell
  CHECK_THROWS_AS(generate_scenario(cfg, 0), std::invalid_argument);
}

TEST_CASE("config invariants") {
  NetworkConfig cfg;
  cfg.users_per_cell = 300;
  cfg.coherence_block_len = 200;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = NetworkConfig{};
  cfg.varsigma = 1.2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = NetworkConfig{};
  cfg.p_max_mw = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("json config round trip with partial keys") {
  const nlohmann::json j = {{"L", 2}, {"K", 3}, {"seed", 9}, {"varsigma", 0.25}};
  const NetworkConfig c = config_from_json(j);
  CHECK(c.num_cells == 2);
  CHECK(c.users_per_cell == 3);
  CHECK(c.seed == 9);
  CHECK(c.varsigma == Catch::Approx(0.25));
  CHECK(c.num_antennas == NetworkConfig{}.num_antennas);  // untouched default

  const NetworkConfig back = config_from_json(config_to_json(c));
  CHECK(back.num_cells == c.num_cells);
  CHECK(back.varsigma == c.varsigma);
  CHECK(back.p_max_mw == c.p_max_mw);
}
