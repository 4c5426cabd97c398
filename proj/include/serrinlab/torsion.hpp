#pragma once

#include <stdexcept>
#include <vector>

#include "serrinlab/geometry.hpp"

namespace serrinlab {

struct SolverDivergence : std::runtime_error {
  explicit SolverDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

/// Discrete torsion function of -Δu = 1 on the profile domain, solved on the
/// symmetry cell in mapped coordinates. Gradient components are physical
/// (u_r, u_t). normal_derivative[j] is ∂_ν u on r = phi(t_j).
struct TorsionSolution {
  MappedGrid grid;
  std::vector<double> u;
  std::vector<double> u_r, u_t;
  std::vector<double> normal_derivative;
  double beta_mean = 0.0;        // mean of -∂_ν u over the lateral boundary
  double sup_grad_interior = 0.0; // max |∇u| over non-Dirichlet nodes
};

TorsionSolution solve_torsion(const MappedGrid& grid);

/// t ↦ ∂_ν u at the lateral boundary (values at the t-nodes of the grid).
const std::vector<double>& normal_derivative_profile(const TorsionSolution& sol);

/// c_eps = 1 - sup_{Ω_eps} |∇u| / beta, Ω_eps = {dist to boundary >= eps}.
double gradient_bound_margin(const TorsionSolution& sol, double eps);

/// Overdeterminedness defect -∂_ν u(t_j) - beta_mean at the boundary nodes.
std::vector<double> serrin_residual(const TorsionSolution& sol);

double max_abs(const std::vector<double>& v);

} // namespace serrinlab
