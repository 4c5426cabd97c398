#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "serrinlab/geometry.hpp"
#include "serrinlab/torsion.hpp"

namespace serrinlab {

struct NoBifurcationInRange : std::runtime_error {
  explicit NoBifurcationInRange(const std::string& msg) : std::runtime_error(msg) {}
};

struct NewtonStagnation : std::runtime_error {
  explicit NewtonStagnation(const std::string& msg) : std::runtime_error(msg) {}
};

/// One converged point of the nontrivial Serrin branch. The amplitude s is
/// the pinned first cosine coefficient; lambda is the half-period solved for.
struct BranchPoint {
  double s = 0.0;
  ProfileDomain domain;
  double lambda = 0.0;
  double beta = 0.0;
  double residual_norm = 0.0;
};

struct FinderOptions {
  int K = 8;           // highest cosine mode carried by the shape
  int n_rho = 96;      // base grid of the Richardson residual pair (N, 2N)
  int n_t = 96;
  double tol = 1e-8;   // convergence threshold on the residual max-norm
  int max_newton = 40;
};

/// Half-period lambda* at which the straight cylinder of radius `base_radius`
/// loses shape-rigidity in the first cosine mode. Located by a scan over
/// lambda plus bisection on the mode-1 response of the Serrin residual.
double detect_bifurcation_period(int n, double base_radius,
                                 const FinderOptions& opts = {});

/// Damped Newton on the cosine-mode projections of the Serrin residual.
/// Unknowns: (a_2..a_K, lambda); a_0 and a_1 = s stay pinned (a_0 carries the
/// scale of the branch, a_1 its amplitude).
BranchPoint newton_solve_profile(const ProfileDomain& init, double s,
                                 const FinderOptions& opts = {});

struct ContinuationResult {
  std::vector<BranchPoint> points;
  std::optional<double> failed_s; // first amplitude that did not converge
  std::string error;
};

ContinuationResult continue_branch(const BranchPoint& start, double s_max,
                                   double ds, const FinderOptions& opts = {});

/// Residual of a shape re-evaluated on the (scale x N, scale x 2N) pair;
/// the invariant check behind every returned BranchPoint.
double reverify_residual(const BranchPoint& p, const FinderOptions& opts,
                         int scale = 2);

} // namespace serrinlab
