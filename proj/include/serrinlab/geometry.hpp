#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace serrinlab {

struct NonPositiveProfile : std::runtime_error {
  explicit NonPositiveProfile(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnsupportedDimension : std::runtime_error {
  explicit UnsupportedDimension(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularGrid : std::runtime_error {
  explicit SingularGrid(const std::string& msg) : std::runtime_error(msg) {}
};

/// Periodic axially-symmetric domain {|z| < phi(t)}, z in R^n, t in R.
/// phi(t) = a_0 + sum_{k>=1} a_k cos(k pi t / lambda) is even and
/// 2*lambda-periodic by construction, with phi'(0) = phi'(lambda) = 0.
struct ProfileDomain {
  int n = 1;                         // dimension of the radial slice
  int m = 1;                         // periodic directions; only m = 1 supported
  double half_period = 0.0;          // lambda
  std::vector<double> cosine_coeffs; // a_0, a_1, ..., a_K
};

ProfileDomain build_profile(int n, double lambda, std::vector<double> coeffs,
                            int m = 1);

double phi_eval(const ProfileDomain& d, double t);
double phi_derivative(const ProfileDomain& d, double t);
double phi_second_derivative(const ProfileDomain& d, double t);

/// Volume of the unit ball in R^n (omega_n).
double unit_ball_volume(int n);
/// Surface area of the unit sphere S^{n-1} (sigma_{n-1} = n * omega_n).
double unit_sphere_area(int n);

/// |Omega ∩ S| for a slab of `periods` half-periods: omega_n ∫ phi^n dt.
double volume_in_slab(const ProfileDomain& d, int periods);

/// Relative perimeter P(Omega, S): only the lateral boundary r = phi(t)
/// counts, never the slab walls. sigma_{n-1} ∫ phi^{n-1} sqrt(1+phi'^2) dt.
double lateral_perimeter_in_slab(const ProfileDomain& d, int periods);

/// Same integrals with an explicit panel count (for Richardson checks).
double volume_in_slab(const ProfileDomain& d, int periods, int panels);
double lateral_perimeter_in_slab(const ProfileDomain& d, int periods, int panels);

/// Tensor-product grid on the symmetry cell {0 <= rho <= 1, 0 <= t <= T}
/// through the map (rho, t) -> (rho * profile(t), t). The physical boundary
/// r = profile(t) is exactly the grid line rho = 1. The profile samples are
/// stored per t-node so that shrunk domains (which are not cosine series)
/// reuse the same machinery.
struct MappedGrid {
  ProfileDomain domain; // originating profile (metadata; solver uses samples)
  int n_rho = 0;        // cell counts; nodes are (n_rho+1) x (n_t+1)
  int n_t = 0;
  double t_extent = 0.0; // usually lambda; 2*lambda for two-cell solves
  std::vector<double> phi, dphi, d2phi; // profile samples at t_j

  double h_rho() const { return 1.0 / n_rho; }
  double h_t() const { return t_extent / n_t; }
  double rho(int i) const { return double(i) / n_rho; }
  double t(int j) const { return t_extent * double(j) / n_t; }
  double r(int i, int j) const { return rho(i) * phi[j]; }
  int num_nodes() const { return (n_rho + 1) * (n_t + 1); }
  int idx(int i, int j) const { return i * (n_t + 1) + j; }
};

MappedGrid generate_grid(const ProfileDomain& d, int n_rho, int n_t);

/// Grid over [0, t_extent] (t_extent a multiple of lambda) with the profile
/// offset inward by eps along the normal: psi = phi - eps*sqrt(1+phi'^2).
MappedGrid generate_shrunk_grid(const ProfileDomain& d, double eps, int n_rho,
                                int n_t, double t_extent);

} // namespace serrinlab
