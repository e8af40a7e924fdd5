#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "remest/channel.hpp"
#include "remest/lti.hpp"

namespace remest::test {

inline std::string data_path(const std::string& name) { return std::string(REMEST_DATA_DIR) + "/" + name; }

// Linearised Pendubot at the upright equilibrium, 15 ms sampling.
inline LtiSystem pendubot() {
  LtiSystem s;
  s.A = Matrix{{1.0058, 0.015, -0.0016, 0.0},
               {0.7808, 1.0058, -0.2105, -0.0016},
               {-0.006, 0.0, 1.0077, 0.015},
               {-0.7962, -0.006, 1.0294, 1.0077}};
  s.C = Matrix{{1, 0, 0, 0}, {0, 0, 1, 0}};
  const Vector u{0.003, 1.0, -0.005, -2.15};
  s.W = Matrix::column(u) * Matrix::row(u);
  s.V = Matrix{{0.001, 0}, {0, 0.001}};
  return s;
}

inline MarkovChannel two_state(double d1, double d2) {
  return MarkovChannel{Matrix{{0.1, 0.9}, {0.5, 0.5}}, Vector{d1, d2}, std::nullopt};
}

inline LtiSystem scalar_system(double a, double c, double w, double v) {
  return LtiSystem{Matrix{{a}}, Matrix{{c}}, Matrix{{w}}, Matrix{{v}}};
}

// Random row-stochastic matrix with strictly positive entries.
inline Matrix random_stochastic(std::size_t m, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix p(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += p(i, j) = u(gen);
    for (std::size_t j = 0; j < m; ++j) p(i, j) /= s;
  }
  return p;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix z(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) z(i, j) = n(gen);
  return z;
}

}  // namespace remest::test
