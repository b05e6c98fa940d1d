#pragma once

// Total-variation proximal problem
//
//   min_w  TV(w) + 1/(2 theta) * int (w - d)^2
//
// with isotropic TV built from forward differences (Neumann boundary) and the
// backward-difference divergence as its exact negative adjoint. Solved with a
// first-order primal-dual iteration with over-relaxation; the duality gap is
// the stopping criterion.

#include <cmath>
#include <optional>
#include <vector>

#include "flatflow/grid.hpp"

namespace flatflow {

struct RofProblem {
  GridField d;
  double theta = 1.0;
};

/// Cell-centred dual vector field.
struct DualField {
  std::vector<double> x;
  std::vector<double> y;

  DualField() = default;
  explicit DualField(std::size_t n) : x(n, 0.0), y(n, 0.0) {}
  std::size_t size() const { return x.size(); }
};

struct RofSolution {
  GridField w;
  DualField p;
  double gap = 0.0;
  double primal_energy = 0.0;
  int iterations = 0;
  /// Primal energy at every checkpoint (see RofOptions::checkpoint_every).
  std::vector<double> energy_history;
};

struct RofOptions {
  double tol = 1e-6;
  int max_iter = 5000;
  int gap_every = 10;
  int checkpoint_every = 50;
  /// Primal step in units of theta; the dual step follows from tau*sigma*L^2 = 1.
  double tau_over_theta = 0.25;
  std::optional<GridField> warm_w;
  std::optional<DualField> warm_p;
};

namespace detail {

// Forward-difference gradient divided by the spacing.
inline void gradient(const Grid& g, std::span<const double> w, std::vector<double>& gx, std::vector<double>& gy) {
  const int nx = g.nx, ny = g.ny;
  const double inv = 1.0 / g.spacing;
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * nx;
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = row + i;
      gx[k] = i + 1 < nx ? (w[k + 1] - w[k]) * inv : 0.0;
      gy[k] = j + 1 < ny ? (w[k + nx] - w[k]) * inv : 0.0;
    }
  }
}

inline void divergence(const Grid& g, const DualField& p, std::vector<double>& div) {
  const int nx = g.nx, ny = g.ny;
  const double inv = 1.0 / g.spacing;
  for (int j = 0; j < ny; ++j) {
    const std::size_t row = static_cast<std::size_t>(j) * nx;
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = row + i;
      double v = 0.0;
      if (i + 1 < nx) v += p.x[k];
      if (i > 0) v -= p.x[k - 1];
      if (j + 1 < ny) v += p.y[k];
      if (j > 0) v -= p.y[k - nx];
      div[k] = v * inv;
    }
  }
}

}  // namespace detail

/// TV(w) in world units.
inline double total_variation(const GridField& w) {
  const Grid& g = w.grid();
  std::vector<double> gx(g.size()), gy(g.size());
  detail::gradient(g, w.values(), gx, gy);
  double tv = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = g.index(i, j);
      row += std::hypot(gx[k], gy[k]);
    }
    tv += row;
  }
  return tv * g.cell_area();
}

inline double rof_primal_energy(const GridField& w, const RofProblem& problem) {
  const Grid& g = w.grid();
  double fid = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      const double r = w(i, j) - problem.d(i, j);
      row += r * r;
    }
    fid += row;
  }
  return total_variation(w) + fid * g.cell_area() / (2.0 * problem.theta);
}

inline double rof_dual_energy(const DualField& p, const RofProblem& problem) {
  const Grid& g = problem.d.grid();
  std::vector<double> div(g.size());
  detail::divergence(g, p, div);
  double e = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t k = g.index(i, j);
      row += -problem.d[k] * div[k] - 0.5 * problem.theta * div[k] * div[k];
    }
    e += row;
  }
  return e * g.cell_area();
}

/// Primal minus dual energy of the pair (w, p).
inline double duality_gap(const GridField& w, const DualField& p, const RofProblem& problem) {
  if (p.size() != w.size()) throw Error(ErrorKind::InvalidArgument, "dual field size mismatch");
  for (std::size_t k = 0; k < p.size(); ++k)
    if (std::hypot(p.x[k], p.y[k]) > 1.0 + 1e-12)
      throw Error(ErrorKind::DualInfeasible, "dual field exceeds unit norm");
  return rof_primal_energy(w, problem) - rof_dual_energy(p, problem);
}

inline RofSolution rof_solve(const RofProblem& problem, double tol, int max_iter, RofOptions options = {}) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
  if (!(problem.theta > 0.0)) throw Error(ErrorKind::InvalidArgument, "theta must be positive");
  if (!problem.d.all_finite()) throw Error(ErrorKind::NonFinite, "ROF datum has non-finite values");
  options.tol = tol;
  options.max_iter = max_iter;

  const Grid& g = problem.d.grid();
  const std::size_t n = g.size();
  const int nx = g.nx, ny = g.ny;
  const double s = g.spacing;
  const double theta = problem.theta;
  const double lip2 = 8.0 / (s * s);
  const double tau = options.tau_over_theta * theta;
  const double sigma = 1.0 / (tau * lip2);
  const double inv_s = 1.0 / s;
  const double shrink = 1.0 / (1.0 + tau / theta);
  const double pull = tau / theta;

  // Iterate on d - min d so that shifting the datum leaves the iteration,
  // its stopping test and p unchanged.
  const double ref = problem.d.min();
  RofProblem centered{problem.d, theta};
  for (double& v : centered.d.values()) v -= ref;

  RofSolution sol;
  sol.w = options.warm_w ? *options.warm_w : problem.d;
  if (sol.w.grid() != g) throw Error(ErrorKind::InvalidArgument, "warm start grid mismatch");
  for (double& v : sol.w.values()) v -= ref;
  sol.p = options.warm_p && options.warm_p->size() == n ? *options.warm_p : DualField(n);
  std::vector<double> wbar(sol.w.values().begin(), sol.w.values().end());
  std::vector<double> div(n);
  std::span<double> w = sol.w.values();
  const std::span<const double> d = centered.d.values();
  auto& px = sol.p.x;
  auto& py = sol.p.y;

  for (int it = 1; it <= options.max_iter; ++it) {
    // Dual ascent and projection onto the unit ball.
    for (int j = 0; j < ny; ++j) {
      const std::size_t row = static_cast<std::size_t>(j) * nx;
      for (int i = 0; i < nx; ++i) {
        const std::size_t k = row + i;
        const double gx = i + 1 < nx ? (wbar[k + 1] - wbar[k]) * inv_s : 0.0;
        const double gy = j + 1 < ny ? (wbar[k + nx] - wbar[k]) * inv_s : 0.0;
        const double qx = px[k] + sigma * gx;
        const double qy = py[k] + sigma * gy;
        const double m = std::max(1.0, std::sqrt(qx * qx + qy * qy));
        px[k] = qx / m;
        py[k] = qy / m;
      }
    }
    detail::divergence(g, sol.p, div);
    // Primal proximal step and over-relaxation.
    for (std::size_t k = 0; k < n; ++k) {
      const double wn = (w[k] + tau * div[k] + pull * d[k]) * shrink;
      wbar[k] = 2.0 * wn - w[k];
      w[k] = wn;
    }
    sol.iterations = it;
    const bool at_checkpoint = options.checkpoint_every > 0 && it % options.checkpoint_every == 0;
    if (it % options.gap_every == 0 || it == 1 || it == options.max_iter || at_checkpoint) {
      const double primal = rof_primal_energy(sol.w, centered);
      const double dual = rof_dual_energy(sol.p, centered);
      if (!std::isfinite(primal) || !std::isfinite(dual))
        throw Error(ErrorKind::NonFinite, "primal-dual iteration diverged");
      sol.primal_energy = primal;
      sol.gap = primal - dual;
      if (at_checkpoint) sol.energy_history.push_back(primal);
      if (sol.gap <= options.tol * (1.0 + std::abs(primal))) break;
    }
  }
  sol.gap = std::max(sol.gap, 0.0);
  for (double& v : sol.w.values()) v += ref;
  return sol;
}

}  // namespace flatflow
