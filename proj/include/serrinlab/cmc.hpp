#pragma once

#include <stdexcept>
#include <vector>

#include "serrinlab/geometry.hpp"
#include "serrinlab/serrin_finder.hpp"
#include "serrinlab/torsion.hpp"

namespace serrinlab {

struct CEpsNonPositive : std::runtime_error {
  explicit CEpsNonPositive(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnboundedSuspected : std::runtime_error {
  explicit UnboundedSuspected(const std::string& msg)
      : std::runtime_error(msg) {}
};

struct CmcOptions {
  int n_rho = 128;
  int n_t = 128;
  double tol = 1e-10; // pointwise residual of the collocated equation
  int max_newton = 60;
  // absolute lower bound for the boundedness noise floor; the effective
  // floor also includes a measured discretization-error estimate
  double cauchy_floor = 1e-6;
  // Optional admissible warm start (node values on the target grid); the
  // default is w = 0, whose first Newton step is the linearized solution.
  const std::vector<double>* initial_guess = nullptr;
};

/// One solved shrink level: the graph function on the eps-shrunk symmetry
/// cell, Dirichlet at rho = 1, natural flux on the axis and the walls.
struct CmcField {
  MappedGrid grid; // shrunk cell, profile psi = phi - eps sqrt(1 + phi'^2)
  double eps = 0.0;
  double beta = 0.0;
  std::vector<double> w;       // node values, min normalized to 0
  std::vector<double> contact; // q = -(grad w . eta)/sqrt(1+|grad w|^2) per t
  double energy = 0.0;
  double zero_energy = 0.0; // value of the functional at w = 0
  int newton_iters = 0;
  double residual_norm = 0.0;
};

struct CMCSolution {
  ProfileDomain domain;
  double beta = 0.0;
  std::vector<double> eps_sequence;
  std::vector<CmcField> w_fields;
  MappedGrid compact_grid;          // 0.9 x the smallest (eps_max) cell
  std::vector<double> w_limit;      // extrapolated on compact_grid, mean 0
  std::vector<double> cauchy_diffs; // sup differences after mean matching
  double cauchy_noise_floor = 0.0;  // discretization-error estimate used
                                    // by the boundedness test
  double curvature_residual = 0.0;  // max over rho <= 0.9 at the finest eps
  double periodicity_residual = 0.0;
  bool bounded = false;
};

/// Discrete area-type functional G(w) = sum r^{n-1}(sqrt(1+|grad w|^2) - w/beta)
/// over the cell (2x2 Gauss per element); the object Newton descends.
double cmc_energy(const MappedGrid& g, const std::vector<double>& w,
                  double beta);

CmcField solve_cmc_eps(const TorsionSolution& sol, double eps,
                       const CmcOptions& opts = {});

CMCSolution solve_cmc_limit(const TorsionSolution& sol,
                            const std::vector<double>& eps_list,
                            const CmcOptions& opts = {});

/// Re-solves the finest-eps problem on a doubled (two period cells) domain
/// and compares with the reflected tiling of the one-cell solution, after
/// matching constants at the shared axis node.
double shift_periodicity_check(const CMCSolution& c,
                               const CmcOptions& opts = {});

/// Centered-difference -div(grad w / sqrt(1+|grad w|^2)) - 1/beta at the
/// grid nodes (even/odd ghosts at axis and walls, one-sided at rho = 1).
std::vector<double> curvature_residual_field(const MappedGrid& g,
                                             const std::vector<double>& w,
                                             double beta);

} // namespace serrinlab
