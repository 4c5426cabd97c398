#include "serrinlab/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace serrinlab {

namespace {

// Composite Simpson over [0, b] with an even panel count.
template <class F>
double simpson(F&& f, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  const double h = b / panels;
  double acc = f(0.0) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return acc * h / 3.0;
}

constexpr int kDefaultPanels = 1 << 12;

} // namespace

ProfileDomain build_profile(int n, double lambda, std::vector<double> coeffs,
                            int m) {
  if (m != 1)
    throw UnsupportedDimension("only m = 1 periodic directions supported, got m = " +
                               std::to_string(m));
  if (n < 1) throw UnsupportedDimension("radial dimension n must be >= 1");
  if (!(lambda > 0.0)) throw NonPositiveProfile("half-period must be positive");
  if (coeffs.empty()) throw NonPositiveProfile("empty coefficient list");

  ProfileDomain d;
  d.n = n;
  d.m = 1;
  d.half_period = lambda;
  d.cosine_coeffs = std::move(coeffs);

  // Sufficient condition a_0 > sum |a_k| short-circuits the sampling.
  double tail = 0.0;
  for (size_t k = 1; k < d.cosine_coeffs.size(); ++k)
    tail += std::abs(d.cosine_coeffs[k]);
  if (d.cosine_coeffs[0] > tail) return d;

  const int samples = 2048;
  for (int i = 0; i <= samples; ++i) {
    const double t = lambda * double(i) / samples;
    if (phi_eval(d, t) <= 0.0)
      throw NonPositiveProfile("profile non-positive at t = " + std::to_string(t));
  }
  return d;
}

double phi_eval(const ProfileDomain& d, double t) {
  const double w = std::numbers::pi / d.half_period;
  double v = d.cosine_coeffs[0];
  for (size_t k = 1; k < d.cosine_coeffs.size(); ++k)
    v += d.cosine_coeffs[k] * std::cos(double(k) * w * t);
  return v;
}

double phi_derivative(const ProfileDomain& d, double t) {
  const double w = std::numbers::pi / d.half_period;
  double v = 0.0;
  for (size_t k = 1; k < d.cosine_coeffs.size(); ++k)
    v -= d.cosine_coeffs[k] * double(k) * w * std::sin(double(k) * w * t);
  return v;
}

double phi_second_derivative(const ProfileDomain& d, double t) {
  const double w = std::numbers::pi / d.half_period;
  double v = 0.0;
  for (size_t k = 1; k < d.cosine_coeffs.size(); ++k) {
    const double kw = double(k) * w;
    v -= d.cosine_coeffs[k] * kw * kw * std::cos(kw * t);
  }
  return v;
}

double unit_ball_volume(int n) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

double unit_sphere_area(int n) { return n * unit_ball_volume(n); }

double volume_in_slab(const ProfileDomain& d, int periods, int panels) {
  const double cell =
      simpson([&](double t) { return std::pow(phi_eval(d, t), d.n); },
              d.half_period, panels);
  return unit_ball_volume(d.n) * cell * periods;
}

double lateral_perimeter_in_slab(const ProfileDomain& d, int periods,
                                 int panels) {
  const double cell = simpson(
      [&](double t) {
        const double dp = phi_derivative(d, t);
        return std::pow(phi_eval(d, t), d.n - 1) * std::sqrt(1.0 + dp * dp);
      },
      d.half_period, panels);
  return unit_sphere_area(d.n) * cell * periods;
}

double volume_in_slab(const ProfileDomain& d, int periods) {
  return volume_in_slab(d, periods, kDefaultPanels);
}

double lateral_perimeter_in_slab(const ProfileDomain& d, int periods) {
  return lateral_perimeter_in_slab(d, periods, kDefaultPanels);
}

MappedGrid generate_grid(const ProfileDomain& d, int n_rho, int n_t) {
  MappedGrid g;
  g.domain = d;
  g.n_rho = n_rho;
  g.n_t = n_t;
  g.t_extent = d.half_period;
  g.phi.resize(n_t + 1);
  g.dphi.resize(n_t + 1);
  g.d2phi.resize(n_t + 1);
  for (int j = 0; j <= n_t; ++j) {
    const double t = g.t(j);
    g.phi[j] = phi_eval(d, t);
    g.dphi[j] = phi_derivative(d, t);
    g.d2phi[j] = phi_second_derivative(d, t);
    if (g.phi[j] <= 0.0) throw SingularGrid("profile vanished at a grid node");
  }
  return g;
}

MappedGrid generate_shrunk_grid(const ProfileDomain& d, double eps, int n_rho,
                                int n_t, double t_extent) {
  MappedGrid g;
  g.domain = d;
  g.n_rho = n_rho;
  g.n_t = n_t;
  g.t_extent = t_extent;
  g.phi.resize(n_t + 1);
  g.dphi.resize(n_t + 1);
  g.d2phi.resize(n_t + 1);
  const double dh = 1e-6 * std::max(1.0, t_extent);
  for (int j = 0; j <= n_t; ++j) {
    const double t = g.t(j);
    const double p = phi_eval(d, t);
    const double dp = phi_derivative(d, t);
    const double d2p = phi_second_derivative(d, t);
    const double s = std::sqrt(1.0 + dp * dp);
    g.phi[j] = p - eps * s;
    g.dphi[j] = dp - eps * dp * d2p / s;
    if (g.phi[j] <= 0.0)
      throw NonPositiveProfile("shrunk profile non-positive; eps too large");
  }
  // psi'' by differencing psi' (only used in low-order coefficients).
  for (int j = 0; j <= n_t; ++j) {
    const double t = g.t(j);
    auto dpsi = [&](double tt) {
      const double dp = phi_derivative(d, tt);
      const double d2p = phi_second_derivative(d, tt);
      return dp - eps * dp * d2p / std::sqrt(1.0 + dp * dp);
    };
    g.d2phi[j] = (dpsi(t + dh) - dpsi(t - dh)) / (2.0 * dh);
  }
  return g;
}

} // namespace serrinlab
