#pragma once

#include <stdexcept>
#include <vector>

#include "serrinlab/geometry.hpp"
#include "serrinlab/torsion.hpp"

namespace serrinlab {

struct BadSlab : std::runtime_error {
  explicit BadSlab(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotSerrin : std::runtime_error {
  explicit NotSerrin(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonConvergence : std::runtime_error {
  explicit NonConvergence(const std::string& msg) : std::runtime_error(msg) {}
};

/// Slab S_a^b = R^n x (a, b) with a, b in lambda*Z.
struct Slab {
  double a = 0.0;
  double b = 0.0;
};

/// Number of half-periods spanned; throws BadSlab unless a, b in lambda*Z.
int slab_periods(const Slab& slab, double lambda);

struct CheegerCalibrationReport {
  double volume = 0.0;
  double perimeter = 0.0;
  double quotient = 0.0;
  double beta = 0.0;
  double identity_gap = 0.0;        // |quotient - 1/beta|
  double calib_sup = 0.0;           // max |xi| over the closed cell
  double calib_div_residual = 0.0;  // max |div xi + 1/beta| (interior)
  double calib_boundary_gap = 0.0;  // max |xi.nu + 1| on r = phi(t)
  double calib_wall_gap = 0.0;      // max |xi.e_1| on the slab walls
  double tv_min_value = 0.0;        // filled by tv_relaxed_minimize
  double subset_oracle_min = 0.0;   // filled by subset_oracle
};

double cheeger_quotient(const ProfileDomain& d, const Slab& slab);

/// Checks the calibration field xi = (1/beta) grad u on the grid of `sol`.
/// Throws NotSerrin when the residual of `sol` exceeds `serrin_tol`.
CheegerCalibrationReport verify_calibration(const TorsionSolution& sol,
                                            const Slab& slab,
                                            double serrin_tol = 1e-6);

struct CalibTolerances {
  double sup = 1e-3;      // allowed excess of |xi| over 1
  double div = 5e-4;
  double boundary = 5e-4;
  double wall = 5e-4;
};

bool one_laplacian_check(const CheegerCalibrationReport& report,
                         const CalibTolerances& tol = {});

struct TvOptions {
  int max_iters = 300000;
  double gap_tol = 5e-4;  // absolute primal-dual gap
  int check_every = 200;
  // Optional dual warm start from the calibration field (1/beta) grad u.
  // Without it the flat scaling direction of the relaxed functional lets
  // the primal iterate drift away from 1_Omega before the gap certifies.
  const TorsionSolution* calibration = nullptr;
};

struct TvResult {
  double min_value = 0.0;
  std::vector<double> minimizer; // nz*nt cell values, z-major
  int nz = 0, nt = 0;
  double z_max = 0.0;
  double t_min = 0.0, t_max = 0.0; // slab extent covered by the t cells
  double gap = 0.0;
  int iters = 0;
  double start_value = 0.0; // objective at v = 1_Omega
};

/// Relaxed minimality check: min over v: S -> [0,1], v = 0 outside Omega, of
/// TV_S(v) - (1/beta) ∫ v, with no perimeter counted on the slab walls.
/// Primal-dual first-order iteration started from v = 1_Omega.
TvResult tv_relaxed_minimize(const ProfileDomain& d, const Slab& slab,
                             double beta, int nz, int nt,
                             const TvOptions& opts = {});

/// Brute-force relative-Cheeger lower bound: minimum quotient P(A,S)/|A| over
/// axis-aligned rectangles and coordinate-monotone staircase unions of cells.
double subset_oracle(const ProfileDomain& d, const Slab& slab, int max_cells);

} // namespace serrinlab
