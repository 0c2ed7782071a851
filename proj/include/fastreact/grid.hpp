#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fastreact/error.hpp"

namespace fastreact {

/// Uniform cell-centred grid on (0, L).
class Grid1D {
 public:
  Grid1D(int n_cells, double length) : n_(n_cells), length_(length) {
    if (n_cells < 8) throw ValidationError("grid needs at least 8 cells");
    if (!(length > 0.0)) throw ValidationError("domain length must be positive");
  }

  int n_cells() const noexcept { return n_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n_); }
  double length() const noexcept { return length_; }
  double h() const noexcept { return length_ / n_; }
  double x(std::size_t j) const noexcept { return (static_cast<double>(j) + 0.5) * h(); }

 private:
  int n_;
  double length_;
};

// Second-order Laplacian with mirrored ghost cells (homogeneous Neumann).
// Rows sum to zero, so sum_j (Lap v)_j = 0.
inline void neumann_laplacian(std::span<const double> v, std::span<double> out, double h) {
  const std::size_t n = v.size();
  const double inv_h2 = 1.0 / (h * h);
  out[0] = (v[1] - v[0]) * inv_h2;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    out[j] = (v[j - 1] - 2.0 * v[j] + v[j + 1]) * inv_h2;
  }
  out[n - 1] = (v[n - 2] - v[n - 1]) * inv_h2;
}

inline std::vector<double> neumann_laplacian(std::span<const double> v, double h) {
  std::vector<double> out(v.size());
  neumann_laplacian(v, out, h);
  return out;
}

// Solves (I - c Lap_h) x = rhs in place (Thomas algorithm). The matrix is
// symmetric, strictly diagonally dominant for c >= 0.
inline void solve_shifted_neumann(double c, double h, std::span<double> rhs) {
  const std::size_t n = rhs.size();
  const double k = c / (h * h);
  thread_local std::vector<double> cprime;
  cprime.resize(n);

  auto diag = [&](std::size_t j) { return (j == 0 || j + 1 == n) ? 1.0 + k : 1.0 + 2.0 * k; };
  const double off = -k;

  double denom = diag(0);
  cprime[0] = off / denom;
  rhs[0] /= denom;
  for (std::size_t j = 1; j < n; ++j) {
    denom = diag(j) - off * cprime[j - 1];
    cprime[j] = off / denom;
    rhs[j] = (rhs[j] - off * rhs[j - 1]) / denom;
  }
  for (std::size_t j = n - 1; j-- > 0;) {
    rhs[j] -= cprime[j] * rhs[j + 1];
  }
}

}  // namespace fastreact
