#include "serrinlab/cheeger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <cstdio>
#include <cstdlib>

namespace serrinlab {

int slab_periods(const Slab& slab, double lambda) {
  auto check = [&](double x) {
    const double q = x / lambda;
    if (std::abs(q - std::round(q)) > 1e-9)
      throw BadSlab("slab endpoint " + std::to_string(x) +
                    " is not a multiple of lambda");
    return int(std::lround(q));
  };
  const int ka = check(slab.a), kb = check(slab.b);
  if (kb <= ka) throw BadSlab("slab requires a < b");
  return kb - ka;
}

double cheeger_quotient(const ProfileDomain& d, const Slab& slab) {
  const int p = slab_periods(slab, d.half_period);
  return lateral_perimeter_in_slab(d, p) / volume_in_slab(d, p);
}

CheegerCalibrationReport verify_calibration(const TorsionSolution& sol,
                                            const Slab& slab,
                                            double serrin_tol) {
  const double defect = max_abs(serrin_residual(sol));
  if (defect > serrin_tol)
    throw NotSerrin("serrin residual " + std::to_string(defect) +
                    " exceeds tolerance");

  const MappedGrid& g = sol.grid;
  const int Nr = g.n_rho, Nt = g.n_t, n = g.domain.n;
  const double hr = g.h_rho(), ht = g.h_t();
  const double beta = sol.beta_mean;

  CheegerCalibrationReport rep;
  const int periods = slab_periods(slab, g.domain.half_period);
  rep.volume = volume_in_slab(g.domain, periods);
  rep.perimeter = lateral_perimeter_in_slab(g.domain, periods);
  rep.quotient = rep.perimeter / rep.volume;
  rep.beta = beta;
  rep.identity_gap = std::abs(rep.quotient - 1.0 / beta);

  // xi = (1/beta) grad u, physical components on the grid.
  const int N = g.num_nodes();
  std::vector<double> xr(N), xt(N);
  for (int k = 0; k < N; ++k) {
    xr[k] = sol.u_r[k] / beta;
    xt[k] = sol.u_t[k] / beta;
  }

  double sup = 0.0;
  for (int k = 0; k < N; ++k) sup = std::max(sup, std::hypot(xr[k], xt[k]));
  rep.calib_sup = sup;

  // div xi = d_r xi_r + (n-1) xi_r / r + d_t xi_t; mapped-coordinate chain
  // rule with reflection ghosts (xi_r odd in rho, xi_t odd across the walls).
  auto at = [&](const std::vector<double>& f, int i, int j, double sign_i,
                double sign_j) {
    double s = 1.0;
    if (i < 0) {
      i = -i;
      s *= sign_i;
    }
    if (j < 0) {
      j = -j;
      s *= sign_j;
    }
    if (j > Nt) {
      j = 2 * Nt - j;
      s *= sign_j;
    }
    return s * f[g.idx(i, j)];
  };
  double div_res = 0.0;
  for (int i = 0; i < Nr; ++i) {
    for (int j = 0; j <= Nt; ++j) {
      const double p = g.phi[j], dp = g.dphi[j];
      const double g_ = -g.rho(i) * dp / p;
      const double dxr_drho =
          (at(xr, i + 1, j, -1, 1) - at(xr, i - 1, j, -1, 1)) / (2.0 * hr);
      const double dxt_dtau =
          (at(xt, i, j + 1, 1, -1) - at(xt, i, j - 1, 1, -1)) / (2.0 * ht);
      const double dxt_drho =
          (at(xt, i + 1, j, 1, -1) - at(xt, i - 1, j, 1, -1)) / (2.0 * hr);
      const double dr_xr = dxr_drho / p;
      const double dt_xt = dxt_dtau + g_ * dxt_drho;
      double div;
      if (i == 0)
        div = n * dr_xr + dt_xt;
      else
        div = dr_xr + double(n - 1) * xr[g.idx(i, j)] / g.r(i, j) + dt_xt;
      div_res = std::max(div_res, std::abs(div + 1.0 / beta));
    }
  }
  rep.calib_div_residual = div_res;

  double bdy = 0.0;
  for (int j = 0; j <= Nt; ++j)
    bdy = std::max(bdy, std::abs(sol.normal_derivative[j] / beta + 1.0));
  rep.calib_boundary_gap = bdy;

  double wall = 0.0;
  for (int i = 0; i <= Nr; ++i) {
    wall = std::max(wall, std::abs(xt[g.idx(i, 0)]));
    wall = std::max(wall, std::abs(xt[g.idx(i, Nt)]));
  }
  rep.calib_wall_gap = wall;
  return rep;
}

bool one_laplacian_check(const CheegerCalibrationReport& report,
                         const CalibTolerances& tol) {
  return report.calib_sup <= 1.0 + tol.sup &&
         report.calib_div_residual <= tol.div &&
         report.calib_boundary_gap <= tol.boundary &&
         report.calib_wall_gap <= tol.wall;
}

TvResult tv_relaxed_minimize(const ProfileDomain& d, const Slab& slab,
                             double beta, int nz, int nt,
                             const TvOptions& opts) {
  if (!(beta > 0.0)) throw BadSlab("beta must be positive");
  slab_periods(slab, d.half_period);
  const int n = d.n;
  const double sigma_w = unit_sphere_area(n);
  const double L = slab.b - slab.a;

  double phimax = 0.0;
  for (int j = 0; j <= 512; ++j)
    phimax = std::max(phimax, phi_eval(d, slab.a + L * j / 512.0));
  const double z_max = 1.05 * phimax;
  const double hz = z_max / nz, htc = L / nt;

  auto cell = [&](int i, int j) { return i * nt + j; };
  const int nc = nz * nt;

  // Per-cell capacity (column fraction inside Omega) and measure weights:
  // face weights carry the interface radius, the volume weight the center.
  // rw folds the inside fraction of boundary cells into the volume reward,
  // so column volumes are exact; v itself ranges over [0, ub].
  std::vector<double> ub(nc), wz(nc), wt(nc), rw(nc);
  for (int i = 0; i < nz; ++i) {
    const double zc = (i + 0.5) * hz;
    for (int j = 0; j < nt; ++j) {
      const double tc = slab.a + (j + 0.5) * htc;
      const double frac =
          std::clamp((phi_eval(d, tc) - i * hz) / hz, 0.0, 1.0);
      ub[cell(i, j)] = frac > 0.0 ? 1.0 : 0.0;
      wz[cell(i, j)] = sigma_w * std::pow((i + 1) * hz, n - 1);
      wt[cell(i, j)] = sigma_w * std::pow(zc, n - 1);
      rw[cell(i, j)] = sigma_w * std::pow(zc, n - 1) * frac / beta;
    }
  }

  const double mu = hz * htc;
  auto grad1 = [&](const std::vector<double>& v, int i, int j) {
    const double up = (i + 1 < nz) ? v[cell(i + 1, j)] : 0.0;
    return wz[cell(i, j)] * (up - v[cell(i, j)]) / hz;
  };
  auto grad2 = [&](const std::vector<double>& v, int i, int j) {
    if (j + 1 >= nt) return 0.0; // slab wall: jump not counted
    return wt[cell(i, j)] * (v[cell(i, j + 1)] - v[cell(i, j)]) / htc;
  };

  auto energy = [&](const std::vector<double>& v) {
    double e = 0.0;
    for (int i = 0; i < nz; ++i)
      for (int j = 0; j < nt; ++j) {
        const int c = cell(i, j);
        e += std::hypot(grad1(v, i, j), grad2(v, i, j)) - rw[c] * v[c];
      }
    return mu * e;
  };

  std::vector<double> v(nc), vbar(nc), p1(nc, 0.0), p2(nc, 0.0), ktp(nc);
  for (int c = 0; c < nc; ++c) v[c] = ub[c]; // start from v = 1_Omega

  if (opts.calibration) {
    // Seed the dual with xi = (1/beta) grad u sampled at the face points;
    // t is folded into the symmetry cell (u_t flips sign under reflection)
    // and rho clamped to 1 continues the boundary trace outward.
    const auto& g = opts.calibration->grid;
    const double lam = g.t_extent;
    auto xi = [&](double z, double t, double& x1, double& x2) {
      double s = std::fmod(t, 2.0 * lam);
      if (s < 0.0) s += 2.0 * lam;
      double sign_t = 1.0;
      if (s > lam) {
        s = 2.0 * lam - s;
        sign_t = -1.0;
      }
      const double rho = std::min(z / phi_eval(d, s), 1.0);
      double fi = rho / g.h_rho(), fj = s / g.h_t();
      int i0 = std::min(int(fi), g.n_rho - 1);
      int j0 = std::min(int(fj), g.n_t - 1);
      fi -= i0;
      fj -= j0;
      auto lerp2 = [&](const std::vector<double>& f) {
        return (1 - fi) * ((1 - fj) * f[g.idx(i0, j0)] + fj * f[g.idx(i0, j0 + 1)]) +
               fi * ((1 - fj) * f[g.idx(i0 + 1, j0)] + fj * f[g.idx(i0 + 1, j0 + 1)]);
      };
      x1 = lerp2(opts.calibration->u_r) / beta;
      x2 = sign_t * lerp2(opts.calibration->u_t) / beta;
      const double nrm = std::hypot(x1, x2);
      if (nrm > 1.0) {
        x1 /= nrm;
        x2 /= nrm;
      }
    };
    for (int i = 0; i < nz; ++i)
      for (int j = 0; j < nt; ++j) {
        const int c = cell(i, j);
        double dummy, x1, x2;
        xi((i + 1) * hz, slab.a + (j + 0.5) * htc, x1, dummy);
        p1[c] = x1;
        if (j + 1 < nt) {
          xi((i + 0.5) * hz, slab.a + (j + 1) * htc, x1, x2);
          p2[c] = x2;
        }
      }
  }
  vbar = v;
  const double start_value = energy(v);

  auto apply_kt = [&](std::vector<double>& out) {
    for (int i = 0; i < nz; ++i)
      for (int j = 0; j < nt; ++j) {
        const int c = cell(i, j);
        double acc = wz[c] * p1[c] / hz;
        if (i > 0) acc -= wz[cell(i - 1, j)] * p1[cell(i - 1, j)] / hz;
        if (j + 1 < nt) acc += wt[c] * p2[c] / htc;
        if (j > 0) acc -= wt[cell(i, j - 1)] * p2[cell(i, j - 1)] / htc;
        out[c] = -acc; // K^T p = -div p
      }
  };

  // Diagonally preconditioned steps (row/column sums of |K|); the plain
  // scalar-step iteration needs millions of sweeps to certify the gap here.
  // One scalar dual step per cell: both components of p share an l2-ball,
  // so an anisotropic diagonal metric would break the Euclidean projection.
  std::vector<double> sg(nc), tau(nc);
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nt; ++j) {
      const int c = cell(i, j);
      sg[c] = hz / (2.0 * wz[c]);
      if (j + 1 < nt) sg[c] = std::min(sg[c], htc / (2.0 * wt[c]));
      double col = wz[c] / hz;
      if (i > 0) col += wz[cell(i - 1, j)] / hz;
      if (j + 1 < nt) col += wt[c] / htc;
      if (j > 0) col += wt[cell(i, j - 1)] / htc;
      tau[c] = 1.0 / col;
    }

  TvResult res;
  res.nz = nz;
  res.nt = nt;
  res.z_max = z_max;
  res.t_min = slab.a;
  res.t_max = slab.b;
  res.start_value = start_value;

  double gap = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    // dual ascent and projection onto the unit ball
    for (int i = 0; i < nz; ++i)
      for (int j = 0; j < nt; ++j) {
        const int c = cell(i, j);
        double q1 = p1[c] + sg[c] * grad1(vbar, i, j);
        double q2 = p2[c] + sg[c] * grad2(vbar, i, j);
        const double norm = std::hypot(q1, q2);
        if (norm > 1.0) {
          q1 /= norm;
          q2 /= norm;
        }
        p1[c] = q1;
        p2[c] = q2;
      }
    apply_kt(ktp);
    for (int c = 0; c < nc; ++c) {
      const double vn =
          std::clamp(v[c] - tau[c] * (ktp[c] - rw[c]), 0.0, ub[c]);
      vbar[c] = 2.0 * vn - v[c];
      v[c] = vn;
    }
    if ((it + 1) % opts.check_every == 0) {
      const double prim = energy(v);
      apply_kt(ktp);
      double dual = 0.0;
      for (int c = 0; c < nc; ++c)
        dual -= ub[c] * std::max(0.0, rw[c] - ktp[c]);
      dual *= mu;
      gap = prim - dual;
      if (std::getenv("TV_DEBUG"))
        std::fprintf(stderr, "tv it=%d prim=%.6e dual=%.6e\n", it + 1, prim,
                     dual);
      if (gap <= opts.gap_tol) break;
    }
  }
  res.gap = gap;
  res.iters = it + 1;
  res.min_value = energy(v);
  res.minimizer = std::move(v);
  if (gap > opts.gap_tol)
    throw NonConvergence("primal-dual gap " + std::to_string(gap) +
                         " after " + std::to_string(res.iters) + " iters");
  return res;
}

namespace {

// Exact perimeter/volume of the staircase set {z < psi_j in column j};
// interfaces between columns are annuli, slab walls are free.
double staircase_quotient(const std::vector<double>& psi, double dt, int n,
                          double omega, double sigma) {
  double vol = 0.0, per = 0.0;
  const int nt = int(psi.size());
  for (int j = 0; j < nt; ++j) {
    vol += omega * std::pow(psi[j], n) * dt;
    if (psi[j] > 0.0) per += sigma * std::pow(psi[j], n - 1) * dt;
    if (j + 1 < nt)
      per += omega * std::abs(std::pow(psi[j + 1], n) - std::pow(psi[j], n));
  }
  if (vol <= 0.0) return std::numeric_limits<double>::infinity();
  return per / vol;
}

} // namespace

double subset_oracle(const ProfileDomain& d, const Slab& slab, int max_cells) {
  slab_periods(slab, d.half_period);
  const int n = d.n;
  const double omega = unit_ball_volume(n), sigma = unit_sphere_area(n);
  const double L = slab.b - slab.a;
  const int grid = std::clamp(int(std::sqrt(double(max_cells))), 4, 64);
  const int nt = grid, nz = grid;
  const double dt = L / nt;

  // max admissible height per column
  std::vector<double> hmax(nt);
  double phimax = 0.0;
  for (int j = 0; j < nt; ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (int q = 0; q <= 8; ++q)
      m = std::min(m, phi_eval(d, slab.a + (j + q / 8.0) * dt));
    hmax[j] = m;
    phimax = std::max(phimax, phi_eval(d, slab.a + (j + 0.5) * dt));
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> psi(nt, 0.0);
  auto consider = [&]() {
    best = std::min(best, staircase_quotient(psi, dt, n, omega, sigma));
  };

  // axis-aligned sub-rectangles
  for (int j1 = 0; j1 < nt; ++j1)
    for (int j2 = j1; j2 < nt; ++j2) {
      double zcap = std::numeric_limits<double>::infinity();
      for (int j = j1; j <= j2; ++j) zcap = std::min(zcap, hmax[j]);
      for (int l = 1; l <= nz; ++l) {
        const double z = zcap * double(l) / nz;
        std::fill(psi.begin(), psi.end(), 0.0);
        for (int j = j1; j <= j2; ++j) psi[j] = z;
        consider();
      }
    }

  // scaled copies of the profile on sub-windows
  for (int j1 = 0; j1 < nt; ++j1)
    for (int j2 = j1; j2 < nt; ++j2)
      for (int l = 1; l <= nz; ++l) {
        const double c = double(l) / nz;
        std::fill(psi.begin(), psi.end(), 0.0);
        for (int j = j1; j <= j2; ++j)
          psi[j] = std::min(c * phi_eval(d, slab.a + (j + 0.5) * dt), hmax[j]);
        consider();
      }

  // seeded unimodal staircases
  std::mt19937 rng(42);
  std::uniform_int_distribution<int> peak(0, nt - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 4000; ++trial) {
    const int pk = peak(rng);
    std::fill(psi.begin(), psi.end(), 0.0);
    double h = unif(rng) * hmax[pk];
    psi[pk] = h;
    double cur = h;
    for (int j = pk - 1; j >= 0; --j) {
      cur = std::min(cur, hmax[j]) * unif(rng);
      psi[j] = cur;
      if (cur <= 0.0) break;
    }
    cur = h;
    for (int j = pk + 1; j < nt; ++j) {
      cur = std::min(cur, hmax[j]) * unif(rng);
      psi[j] = cur;
      if (cur <= 0.0) break;
    }
    consider();
  }
  return best;
}

} // namespace serrinlab
