#include "serrinlab/serrin_finder.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace serrinlab {

namespace {

struct ResidualEval {
  std::vector<double> residual; // extrapolated, at the coarse t-nodes
  double beta = 0.0;
  double residual_max = 0.0;
};

// Serrin residual of the shape evaluated on the (N, 2N) grid pair with
// h^2-elimination. The raw second-order residual floors near 1e-6; the
// extrapolated one reaches below 1e-9, which the 1e-8 branch tolerance needs.
ResidualEval eval_residual(const ProfileDomain& d, int n_rho, int n_t) {
  auto coarse = solve_torsion(generate_grid(d, n_rho, n_t));
  auto fine = solve_torsion(generate_grid(d, 2 * n_rho, 2 * n_t));
  const auto rc = serrin_residual(coarse);
  const auto rf = serrin_residual(fine);
  ResidualEval out;
  out.residual.resize(n_t + 1);
  for (int j = 0; j <= n_t; ++j)
    out.residual[j] = (4.0 * rf[2 * j] - rc[j]) / 3.0;
  out.beta = (4.0 * fine.beta_mean - coarse.beta_mean) / 3.0;
  out.residual_max = max_abs(out.residual);
  return out;
}

// Trapezoid cosine projections of an even grid function, modes 1..K.
Eigen::VectorXd cosine_projections(const std::vector<double>& g, int K) {
  const int Nt = int(g.size()) - 1;
  Eigen::VectorXd p(K);
  for (int k = 1; k <= K; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= Nt; ++j) {
      const double wq = (j == 0 || j == Nt) ? 0.5 : 1.0;
      acc += wq * g[j] * std::cos(k * std::numbers::pi * double(j) / Nt);
    }
    p[k - 1] = 2.0 * acc / Nt;
  }
  return p;
}

ProfileDomain make_domain(int n, double base_radius, double s,
                          const Eigen::VectorXd& x, int K) {
  std::vector<double> coeffs(K + 1, 0.0);
  coeffs[0] = base_radius;
  if (K >= 1) coeffs[1] = s;
  for (int k = 2; k <= K; ++k) coeffs[k] = x[k - 2];
  return build_profile(n, x[K - 1], std::move(coeffs));
}

} // namespace

double detect_bifurcation_period(int n, double base_radius,
                                 const FinderOptions& opts) {
  const double R = base_radius;
  const double delta = 1e-4 * R;
  // Mode-1 response of the residual to a mode-1 boundary perturbation.
  auto mu1 = [&](double lambda) {
    ProfileDomain d = build_profile(n, lambda, {R, delta});
    auto ev = eval_residual(d, opts.n_rho, opts.n_t);
    return cosine_projections(ev.residual, 1)[0] / delta;
  };
  const double lo = 0.5 * R, hi = 6.0 * R, step = 0.25 * R;
  double a = lo, fa = mu1(a);
  for (double b = lo + step; b <= hi + 1e-12 * R; b += step) {
    const double fb = mu1(b);
    if (fa == 0.0) return a;
    if (fa * fb < 0.0) {
      double x0 = a, x1 = b, f0 = fa;
      while (x1 - x0 > 1e-6) {
        const double xm = 0.5 * (x0 + x1);
        const double fm = mu1(xm);
        if (f0 * fm <= 0.0)
          x1 = xm;
        else {
          x0 = xm;
          f0 = fm;
        }
      }
      return 0.5 * (x0 + x1);
    }
    a = b;
    fa = fb;
  }
  throw NoBifurcationInRange("no mode-1 sign change for lambda in [0.5R, 6R]");
}

BranchPoint newton_solve_profile(const ProfileDomain& init, double s,
                                 const FinderOptions& opts) {
  const int K = opts.K;
  const int n = init.n;
  const double R = init.cosine_coeffs[0];
  if (std::abs(s) > 0.3 * R)
    throw NewtonStagnation("amplitude |s| beyond 0.3*a0; branch not tracked");

  Eigen::VectorXd x = Eigen::VectorXd::Zero(K);
  for (int k = 2; k <= K; ++k)
    if (k < int(init.cosine_coeffs.size())) x[k - 2] = init.cosine_coeffs[k];
  x[K - 1] = init.half_period;

  auto assemble = [&](const Eigen::VectorXd& xx) {
    ProfileDomain d = make_domain(n, R, s, xx, K);
    auto ev = eval_residual(d, opts.n_rho, opts.n_t);
    return std::pair<ResidualEval, ProfileDomain>(std::move(ev), std::move(d));
  };

  auto [ev, dom] = assemble(x);
  Eigen::VectorXd F = cosine_projections(ev.residual, K);

  int iter = 0;
  while (ev.residual_max > opts.tol) {
    if (++iter > opts.max_newton)
      throw NewtonStagnation("Newton iteration cap reached, residual " +
                             std::to_string(ev.residual_max));
    // Forward-difference Jacobian; columns are independent torsion solves.
    Eigen::MatrixXd J(K, K);
    for (int c = 0; c < K; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[c]));
      Eigen::VectorXd xp = x;
      xp[c] += h;
      auto [evp, dp] = assemble(xp);
      J.col(c) = (cosine_projections(evp.residual, K) - F) / h;
    }
    Eigen::VectorXd step = J.colPivHouseholderQr().solve(-F);
    if (step.norm() < 1e-14)
      throw NewtonStagnation("step norm underflow with residual " +
                             std::to_string(ev.residual_max));
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 25; ++ls) {
      try {
        Eigen::VectorXd xt = x + alpha * step;
        auto [evt, dt] = assemble(xt);
        Eigen::VectorXd Ft = cosine_projections(evt.residual, K);
        if (Ft.lpNorm<Eigen::Infinity>() <
                (1.0 - 0.25 * alpha) * F.lpNorm<Eigen::Infinity>() ||
            evt.residual_max <= opts.tol) {
          x = xt;
          ev = std::move(evt);
          dom = std::move(dt);
          F = std::move(Ft);
          accepted = true;
          break;
        }
      } catch (const NonPositiveProfile&) {
        // trial shape left the admissible cone; damp further
      } catch (const SingularGrid&) {
      }
      alpha *= 0.5;
    }
    if (!accepted)
      throw NewtonStagnation("line search failed at residual " +
                             std::to_string(ev.residual_max));
  }

  BranchPoint p;
  p.s = s;
  p.domain = dom;
  p.lambda = x[K - 1];
  p.beta = ev.beta;
  p.residual_norm = ev.residual_max;
  return p;
}

ContinuationResult continue_branch(const BranchPoint& start, double s_max,
                                   double ds, const FinderOptions& opts) {
  ContinuationResult out;
  out.points.push_back(start);
  ProfileDomain pred = start.domain;
  const double dir = (s_max >= start.s) ? 1.0 : -1.0;
  const double step = dir * std::abs(ds);
  for (double s = start.s + step;
       dir * s <= dir * s_max + 1e-12 * std::abs(ds); s += step) {
    try {
      BranchPoint p = newton_solve_profile(pred, s, opts);
      pred = p.domain;
      out.points.push_back(std::move(p));
    } catch (const std::exception& e) {
      out.failed_s = s;
      out.error = e.what();
      break;
    }
  }
  return out;
}

double reverify_residual(const BranchPoint& p, const FinderOptions& opts,
                         int scale) {
  auto ev = eval_residual(p.domain, scale * opts.n_rho, scale * opts.n_t);
  return ev.residual_max;
}

} // namespace serrinlab
