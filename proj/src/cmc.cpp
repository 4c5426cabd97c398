#include "serrinlab/cmc.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace serrinlab {

namespace {

// 2x2 Gauss on the reference square [0,1]^2 (for the descent functional).
constexpr double kGaussLo = 0.5 - 0.28867513459481288225;
constexpr double kGaussHi = 0.5 + 0.28867513459481288225;

struct GaussPoint {
  double xi, eta;
};
constexpr GaussPoint kGauss[4] = {{kGaussLo, kGaussLo},
                                  {kGaussHi, kGaussLo},
                                  {kGaussLo, kGaussHi},
                                  {kGaussHi, kGaussHi}};

// Linear stencils producing the physical gradient (w_r, w_t) at each node:
// centered differences with even ghosts at the axis and the walls, one-sided
// at the Dirichlet line rho = 1. The same stencils feed the residual and the
// Jacobian, so Newton converges on exactly the discretized equation.
struct GradStencil {
  std::vector<std::pair<int, double>> r, t;
};

std::vector<GradStencil> build_grad_stencils(const MappedGrid& g) {
  const int nr = g.n_rho, nt = g.n_t;
  const double hr = g.h_rho(), ht = g.h_t();
  std::vector<GradStencil> s(g.num_nodes());
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j <= nt; ++j) {
      auto& e = s[g.idx(i, j)];
      std::vector<std::pair<int, double>> wrho;
      if (i == nr) {
        wrho = {{g.idx(nr, j), 1.5 / hr},
                {g.idx(nr - 1, j), -2.0 / hr},
                {g.idx(nr - 2, j), 0.5 / hr}};
      } else if (i > 0) {
        wrho = {{g.idx(i + 1, j), 0.5 / hr}, {g.idx(i - 1, j), -0.5 / hr}};
      } // i = 0: even ghost, w_rho = 0
      const double psi = g.phi[j];
      for (auto [k, c] : wrho) e.r.emplace_back(k, c / psi);
      if (j > 0 && j < nt) {
        e.t.emplace_back(g.idx(i, j + 1), 0.5 / ht);
        e.t.emplace_back(g.idx(i, j - 1), -0.5 / ht);
      } // walls: even ghost, w_tau = 0
      const double gp = -g.rho(i) * g.dphi[j] / psi;
      if (gp != 0.0)
        for (auto [k, c] : wrho) e.t.emplace_back(k, c * gp);
    }
  return s;
}

// divergence of the flux W as a linear combination of nodal W components;
// comp 0 = W_r, comp 1 = W_t. Equations live at i < n_rho.
struct DivTerm {
  int node;
  int comp;
  double coef;
};

std::vector<DivTerm> div_terms(const MappedGrid& g, int i, int j) {
  const int nr = g.n_rho, nt = g.n_t;
  const double hr = g.h_rho(), ht = g.h_t();
  const double psi = g.phi[j];
  const int dim = g.domain.n;
  std::vector<DivTerm> terms;
  if (i == 0) {
    // W_r odd in rho: full axis limit n * dW_r/dr
    terms.push_back({g.idx(1, j), 0, dim / (hr * psi)});
  } else {
    terms.push_back({g.idx(i + 1, j), 0, 0.5 / (hr * psi)});
    terms.push_back({g.idx(i - 1, j), 0, -0.5 / (hr * psi)});
    terms.push_back({g.idx(i, j), 0, (dim - 1) / g.r(i, j)});
  }
  if (j == 0) {
    terms.push_back({g.idx(i, 1), 1, 1.0 / ht}); // W_t odd across the wall
  } else if (j == nt) {
    terms.push_back({g.idx(i, nt - 1), 1, -1.0 / ht});
  } else {
    terms.push_back({g.idx(i, j + 1), 1, 0.5 / ht});
    terms.push_back({g.idx(i, j - 1), 1, -0.5 / ht});
  }
  const double gp = -g.rho(i) * g.dphi[j] / psi;
  if (gp != 0.0 && i > 0) {
    terms.push_back({g.idx(i + 1, j), 1, 0.5 * gp / hr});
    terms.push_back({g.idx(i - 1, j), 1, -0.5 * gp / hr});
  }
  return terms;
}

struct NewtonOutput {
  std::vector<double> w;
  double energy = 0.0;
  double zero_energy = 0.0;
  int iters = 0;
  double residual = 0.0;
};

void flux(const MappedGrid& g, const std::vector<GradStencil>& grad,
          const std::vector<double>& w, std::vector<double>& Wr,
          std::vector<double>& Wt, std::vector<double>* pr = nullptr,
          std::vector<double>* pt = nullptr) {
  const int nn = g.num_nodes();
  Wr.resize(nn);
  Wt.resize(nn);
  for (int m = 0; m < nn; ++m) {
    double a = 0.0, b = 0.0;
    for (auto [k, c] : grad[m].r) a += c * w[k];
    for (auto [k, c] : grad[m].t) b += c * w[k];
    const double q = std::sqrt(1.0 + a * a + b * b);
    Wr[m] = a / q;
    Wt[m] = b / q;
    if (pr) (*pr)[m] = a;
    if (pt) (*pt)[m] = b;
  }
}

// Damped Newton on the collocated equation div W(grad w) + 1/beta = 0 at
// every node with i < n_rho (Dirichlet w = 0 at rho = 1). Backtracks on the
// residual max-norm; the area functional decreases along the same steps.
NewtonOutput newton_solve(const MappedGrid& g, double beta,
                          const CmcOptions& opts,
                          const std::vector<double>* init) {
  const int nr = g.n_rho, nt = g.n_t;
  const int nn = g.num_nodes();
  const auto grad = build_grad_stencils(g);

  std::vector<int> dof(nn, -1);
  int ndof = 0;
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j <= nt; ++j) dof[g.idx(i, j)] = ndof++;

  std::vector<std::vector<DivTerm>> eqs(ndof);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j <= nt; ++j) eqs[dof[g.idx(i, j)]] = div_terms(g, i, j);

  NewtonOutput out;
  out.w.assign(nn, 0.0);
  if (init) {
    out.w = *init;
    for (int j = 0; j <= nt; ++j) out.w[g.idx(nr, j)] = 0.0;
  }
  out.zero_energy = cmc_energy(g, std::vector<double>(nn, 0.0), beta);

  std::vector<double> Wr(nn), Wt(nn), pr(nn), pt(nn);
  auto residual = [&](const std::vector<double>& w, std::vector<double>& R,
                      bool grads) {
    flux(g, grad, w, Wr, Wt, grads ? &pr : nullptr, grads ? &pt : nullptr);
    double worst = 0.0;
    for (int e = 0; e < ndof; ++e) {
      double div = 0.0;
      for (const auto& t : eqs[e])
        div += t.coef * (t.comp == 0 ? Wr[t.node] : Wt[t.node]);
      R[e] = div + 1.0 / beta;
      worst = std::max(worst, std::abs(R[e]));
    }
    return worst;
  };

  std::vector<double> R(ndof), R_trial(ndof), trial;
  double norm = residual(out.w, R, true);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  std::vector<Eigen::Triplet<double>> trips;

  for (int it = 0; it < opts.max_newton; ++it) {
    out.iters = it;
    out.residual = norm;
    if (norm <= opts.tol) {
      out.energy = cmc_energy(g, out.w, beta);
      return out;
    }
    trips.clear();
    for (int e = 0; e < ndof; ++e)
      for (const auto& t : eqs[e]) {
        const int m = t.node;
        const double a = pr[m], b = pt[m];
        const double q = std::sqrt(1.0 + a * a + b * b);
        const double q3 = q * q * q;
        double d_dpr, d_dpt;
        if (t.comp == 0) {
          d_dpr = (1.0 + b * b) / q3;
          d_dpt = -a * b / q3;
        } else {
          d_dpr = -a * b / q3;
          d_dpt = (1.0 + a * a) / q3;
        }
        for (auto [k, c] : grad[m].r)
          if (dof[k] >= 0) trips.emplace_back(e, dof[k], t.coef * d_dpr * c);
        for (auto [k, c] : grad[m].t)
          if (dof[k] >= 0) trips.emplace_back(e, dof[k], t.coef * d_dpt * c);
      }
    Eigen::SparseMatrix<double> J(ndof, ndof);
    J.setFromTriplets(trips.begin(), trips.end());
    J.makeCompressed();
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw NewtonStagnation("cmc jacobian factorization failed");
    Eigen::VectorXd rhs(ndof);
    for (int e = 0; e < ndof; ++e) rhs[e] = -R[e];
    Eigen::VectorXd step = lu.solve(rhs);

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      trial = out.w;
      for (int c = 0; c < nn; ++c)
        if (dof[c] >= 0) trial[c] += alpha * step[dof[c]];
      const double trial_norm = residual(trial, R_trial, false);
      if (std::isfinite(trial_norm) &&
          trial_norm <= (1.0 - 1e-4 * alpha) * norm) {
        out.w.swap(trial);
        R.swap(R_trial);
        norm = trial_norm;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      char buf[96];
      std::snprintf(buf, sizeof buf,
                    "cmc line search stalled, residual %.3e at iter %d", norm,
                    it);
      throw NewtonStagnation(buf);
    }
    residual(out.w, R, true); // refresh gradients for the next Jacobian
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "cmc newton: residual %.3e after %d iters",
                norm, opts.max_newton);
  throw NewtonStagnation(buf);
}

std::vector<double> contact_angles(const MappedGrid& g,
                                   const std::vector<double>& w) {
  const int nr = g.n_rho, nt = g.n_t;
  const double hr = g.h_rho();
  std::vector<double> q(nt + 1);
  for (int j = 0; j <= nt; ++j) {
    // one-sided w_rho with w = 0 on the Dirichlet line
    const double w_rho =
        (w[g.idx(nr - 2, j)] - 4.0 * w[g.idx(nr - 1, j)]) / (2.0 * hr);
    const double w_r = w_rho / g.phi[j];
    const double slope = std::sqrt(1.0 + g.dphi[j] * g.dphi[j]);
    q[j] = -w_r * slope / std::sqrt(1.0 + w_r * w_r * slope * slope);
  }
  return q;
}

// Cubic Lagrange interpolation of a grid column in rho.
double interp_column(const MappedGrid& g, const std::vector<double>& w, int j,
                     double rho) {
  const int nr = g.n_rho;
  const double hr = g.h_rho();
  int i0 = int(std::floor(rho / hr)) - 1;
  i0 = std::clamp(i0, 0, nr - 3);
  double val = 0.0;
  for (int a = 0; a < 4; ++a) {
    double basis = 1.0;
    for (int b = 0; b < 4; ++b)
      if (b != a)
        basis *= (rho - (i0 + b) * hr) / ((i0 + a) * hr - (i0 + b) * hr);
    val += basis * w[g.idx(i0 + a, j)];
  }
  return val;
}

CmcField solve_field(const ProfileDomain& d, double beta, double eps,
                     const CmcOptions& opts, double t_extent,
                     const std::vector<double>* init) {
  CmcField f;
  try {
    f.grid = generate_shrunk_grid(d, eps, opts.n_rho, opts.n_t, t_extent);
  } catch (const NonPositiveProfile& e) {
    throw CEpsNonPositive(e.what());
  }
  f.eps = eps;
  f.beta = beta;
  auto res = newton_solve(f.grid, beta, opts, init);
  const double w_min = *std::min_element(res.w.begin(), res.w.end());
  for (double& x : res.w) x -= w_min;
  f.w = std::move(res.w);
  f.energy = res.energy;
  f.zero_energy = res.zero_energy;
  f.newton_iters = res.iters;
  f.residual_norm = res.residual;
  f.contact = contact_angles(f.grid, f.w);
  return f;
}

} // namespace

double cmc_energy(const MappedGrid& g, const std::vector<double>& w,
                  double beta) {
  const double sigma = unit_sphere_area(g.domain.n);
  const int dim_exp = g.domain.n - 1;
  double energy = 0.0;
  for (int e_i = 0; e_i < g.n_rho; ++e_i)
    for (int e_j = 0; e_j < g.n_t; ++e_j) {
      const int nodes[4] = {g.idx(e_i, e_j), g.idx(e_i + 1, e_j),
                            g.idx(e_i, e_j + 1), g.idx(e_i + 1, e_j + 1)};
      const double rc[4] = {g.r(e_i, e_j), g.r(e_i + 1, e_j),
                            g.r(e_i, e_j + 1), g.r(e_i + 1, e_j + 1)};
      for (const auto& gp : kGauss) {
        const double N[4] = {(1 - gp.xi) * (1 - gp.eta), gp.xi * (1 - gp.eta),
                             (1 - gp.xi) * gp.eta, gp.xi * gp.eta};
        const double dNxi[4] = {-(1 - gp.eta), (1 - gp.eta), -gp.eta, gp.eta};
        const double dNeta[4] = {-(1 - gp.xi), -gp.xi, (1 - gp.xi), gp.xi};
        double r_xi = 0, r_eta = 0, r_q = 0;
        for (int a = 0; a < 4; ++a) {
          r_xi += dNxi[a] * rc[a];
          r_eta += dNeta[a] * rc[a];
          r_q += N[a] * rc[a];
        }
        const double t_eta = g.h_t();
        const double det = r_xi * t_eta;
        if (!(det > 0.0)) throw SingularGrid("degenerate cmc element");
        double p0 = 0, p1 = 0, wq = 0;
        for (int a = 0; a < 4; ++a) {
          const double br = dNxi[a] / r_xi;
          const double bt = (dNeta[a] - dNxi[a] * r_eta / r_xi) / t_eta;
          p0 += br * w[nodes[a]];
          p1 += bt * w[nodes[a]];
          wq += N[a] * w[nodes[a]];
        }
        const double q = std::sqrt(1.0 + p0 * p0 + p1 * p1);
        const double vol = 0.25 * det * sigma * std::pow(r_q, dim_exp);
        energy += vol * (q - wq / beta);
      }
    }
  return energy;
}

CmcField solve_cmc_eps(const TorsionSolution& sol, double eps,
                       const CmcOptions& opts) {
  if (!(eps > 0.0)) throw CEpsNonPositive("eps must be positive");
  const double c_eps = gradient_bound_margin(sol, eps);
  if (!(c_eps > 0.0)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "c_eps = %.3e <= 0 at eps = %g", c_eps,
                  eps);
    throw CEpsNonPositive(buf);
  }
  return solve_field(sol.grid.domain, sol.beta_mean, eps, opts,
                     sol.grid.t_extent, opts.initial_guess);
}

CMCSolution solve_cmc_limit(const TorsionSolution& sol,
                            const std::vector<double>& eps_list,
                            const CmcOptions& opts) {
  if (eps_list.size() < 2)
    throw CEpsNonPositive("need at least two shrink levels");
  for (size_t k = 0; k + 1 < eps_list.size(); ++k)
    if (!(eps_list[k] > eps_list[k + 1]) || !(eps_list.back() > 0.0))
      throw CEpsNonPositive("eps list must be positive and decreasing");

  CMCSolution c;
  c.domain = sol.grid.domain;
  c.beta = sol.beta_mean;
  c.eps_sequence = eps_list;

  std::vector<double> warm;
  for (size_t k = 0; k < eps_list.size(); ++k) {
    const std::vector<double>* init = nullptr;
    if (k == 0 && opts.initial_guess) {
      init = opts.initial_guess;
    } else if (k > 0) {
      // continuation: previous level rescaled column-by-column
      const auto& prev = c.w_fields.back();
      const auto g = generate_shrunk_grid(c.domain, eps_list[k], opts.n_rho,
                                          opts.n_t, sol.grid.t_extent);
      warm.assign(g.num_nodes(), 0.0);
      for (int j = 0; j <= g.n_t; ++j)
        for (int i = 0; i <= g.n_rho; ++i) {
          const double rho_src = g.rho(i) * g.phi[j] / prev.grid.phi[j];
          warm[g.idx(i, j)] = rho_src >= 1.0
                                  ? 0.0
                                  : interp_column(prev.grid, prev.w, j,
                                                  rho_src);
        }
      init = &warm;
    }
    c.w_fields.push_back(solve_field(c.domain, c.beta, eps_list[k], opts,
                                     sol.grid.t_extent, init));
  }

  // comparison grid: 0.9 x the smallest (eps_max) cell, common to all levels
  c.compact_grid = c.w_fields.front().grid;
  for (auto& x : c.compact_grid.phi) x *= 0.9;
  for (auto& x : c.compact_grid.dphi) x *= 0.9;
  for (auto& x : c.compact_grid.d2phi) x *= 0.9;

  const int nn = c.compact_grid.num_nodes();
  std::vector<std::vector<double>> restricted;
  for (const auto& f : c.w_fields) {
    std::vector<double> v(nn);
    double mean = 0.0;
    for (int j = 0; j <= c.compact_grid.n_t; ++j)
      for (int i = 0; i <= c.compact_grid.n_rho; ++i) {
        const double rho_src =
            c.compact_grid.rho(i) * c.compact_grid.phi[j] / f.grid.phi[j];
        v[c.compact_grid.idx(i, j)] = interp_column(f.grid, f.w, j, rho_src);
        mean += v[c.compact_grid.idx(i, j)];
      }
    mean /= nn;
    for (auto& x : v) x -= mean;
    restricted.push_back(std::move(v));
  }

  for (size_t k = 0; k + 1 < restricted.size(); ++k) {
    double diff = 0.0;
    for (int a = 0; a < nn; ++a)
      diff = std::max(diff, std::abs(restricted[k + 1][a] - restricted[k][a]));
    c.cauchy_diffs.push_back(diff);
  }
  // Successive differences bottom out at the discretization error of the
  // finest level, which grows as the shrunk boundary steepens; estimate it
  // with a half-resolution companion solve so noise is not read as growth.
  {
    const auto& fine = c.w_fields.back();
    CmcOptions half = opts;
    if (opts.n_rho % 2 == 0) half.n_rho = std::max(16, opts.n_rho / 2);
    if (opts.n_t % 2 == 0) half.n_t = std::max(16, opts.n_t / 2);
    half.initial_guess = nullptr;
    std::vector<double> seed;
    const int si = opts.n_rho / half.n_rho, sj = opts.n_t / half.n_t;
    if (si * half.n_rho == opts.n_rho && sj * half.n_t == opts.n_t) {
      seed.resize((half.n_rho + 1) * (half.n_t + 1));
      for (int i = 0; i <= half.n_rho; ++i)
        for (int j = 0; j <= half.n_t; ++j)
          seed[i * (half.n_t + 1) + j] = fine.w[fine.grid.idx(si * i, sj * j)];
      half.initial_guess = &seed;
    }
    const auto coarse = solve_field(c.domain, c.beta, eps_list.back(), half,
                                    sol.grid.t_extent, half.initial_guess);
    double da = 0.0, db = 0.0, dev = 0.0;
    const int cn = coarse.grid.num_nodes();
    std::vector<double> va(cn), vb(cn);
    for (int j = 0; j <= coarse.grid.n_t; ++j)
      for (int i = 0; i <= coarse.grid.n_rho; ++i) {
        const double rho = 0.9 * coarse.grid.rho(i);
        const int a = coarse.grid.idx(i, j);
        va[a] = interp_column(coarse.grid, coarse.w, j, rho);
        vb[a] = interp_column(fine.grid, fine.w, sj * j, rho);
        da += va[a];
        db += vb[a];
      }
    da /= cn;
    db /= cn;
    for (int a = 0; a < cn; ++a)
      dev = std::max(dev, std::abs((va[a] - da) - (vb[a] - db)));
    c.cauchy_noise_floor = std::max(dev, opts.cauchy_floor);
  }

  for (size_t k = 0; k + 1 < c.cauchy_diffs.size(); ++k)
    if (c.cauchy_diffs[k + 1] >
        std::max(c.cauchy_diffs[k], c.cauchy_noise_floor)) {
      char buf[96];
      std::snprintf(buf, sizeof buf,
                    "cauchy differences grow: %.3e -> %.3e at level %zu",
                    c.cauchy_diffs[k], c.cauchy_diffs[k + 1], k + 1);
      throw UnboundedSuspected(buf);
    }
  c.bounded = true;

  // first-order Richardson in eps on the compact subgrid
  const auto& last = restricted.back();
  const auto& prev = restricted[restricted.size() - 2];
  const double e_l = eps_list.back();
  const double e_p = eps_list[eps_list.size() - 2];
  c.w_limit.resize(nn);
  double mean = 0.0;
  for (int a = 0; a < nn; ++a) {
    c.w_limit[a] = last[a] + (last[a] - prev[a]) * e_l / (e_p - e_l);
    mean += c.w_limit[a];
  }
  for (auto& x : c.w_limit) x -= mean / nn;

  const auto& fine = c.w_fields.back();
  const auto field = curvature_residual_field(fine.grid, fine.w, c.beta);
  double worst = 0.0;
  for (int j = 0; j <= fine.grid.n_t; ++j)
    for (int i = 0; i <= fine.grid.n_rho; ++i)
      if (fine.grid.rho(i) <= 0.9)
        worst = std::max(worst, std::abs(field[fine.grid.idx(i, j)]));
  c.curvature_residual = worst;

  c.periodicity_residual = shift_periodicity_check(c, opts);
  return c;
}

double shift_periodicity_check(const CMCSolution& c, const CmcOptions& opts) {
  const auto& fine = c.w_fields.back();
  const int nt = fine.grid.n_t;
  CmcOptions o = opts;
  o.n_rho = fine.grid.n_rho;
  o.n_t = 2 * nt;
  o.initial_guess = nullptr;
  auto two = solve_field(c.domain, c.beta, fine.eps, o,
                         2.0 * fine.grid.t_extent, nullptr);

  // reflected tiling of the one-cell field onto the doubled domain
  std::vector<double> diff(two.grid.num_nodes());
  for (int i = 0; i <= two.grid.n_rho; ++i)
    for (int j = 0; j <= two.grid.n_t; ++j) {
      const int j_src = j <= nt ? j : 2 * nt - j;
      diff[two.grid.idx(i, j)] =
          two.w[two.grid.idx(i, j)] - fine.w[fine.grid.idx(i, j_src)];
    }
  const double c0 = diff[two.grid.idx(0, nt)]; // shared axis node
  double worst = 0.0;
  for (double x : diff) worst = std::max(worst, std::abs(x - c0));
  return worst;
}

std::vector<double> curvature_residual_field(const MappedGrid& g,
                                             const std::vector<double>& w,
                                             double beta) {
  const int nr = g.n_rho, nt = g.n_t;
  const double hr = g.h_rho(), ht = g.h_t();

  // centered differences with the symmetry-cell ghosts (w even at axis and
  // walls, W_r odd in rho, W_t odd in t), one-sided at the rho = 1 edge —
  // the same stencils the solver collocates, so the residual measures the
  // equation, not a change of discretization.
  auto d_rho = [&](const std::vector<double>& f, int i, int j, double par) {
    if (i == 0) return (1.0 - par) * f[g.idx(1, j)] / (2.0 * hr);
    if (i == nr)
      return (3.0 * f[g.idx(nr, j)] - 4.0 * f[g.idx(nr - 1, j)] +
              f[g.idx(nr - 2, j)]) /
             (2.0 * hr);
    return (f[g.idx(i + 1, j)] - f[g.idx(i - 1, j)]) / (2.0 * hr);
  };
  auto d_t = [&](const std::vector<double>& f, int i, int j, double par) {
    if (j == 0) return (1.0 - par) * f[g.idx(i, 1)] / (2.0 * ht);
    if (j == nt) return -(1.0 - par) * f[g.idx(i, nt - 1)] / (2.0 * ht);
    return (f[g.idx(i, j + 1)] - f[g.idx(i, j - 1)]) / (2.0 * ht);
  };

  std::vector<double> Wr(g.num_nodes()), Wt(g.num_nodes());
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j <= nt; ++j) {
      const double gpsi = -g.rho(i) * g.dphi[j] / g.phi[j];
      const double w_rho = d_rho(w, i, j, +1.0);
      const double w_r = w_rho / g.phi[j];
      const double w_t = d_t(w, i, j, +1.0) + gpsi * w_rho;
      const double q = std::sqrt(1.0 + w_r * w_r + w_t * w_t);
      Wr[g.idx(i, j)] = w_r / q;
      Wt[g.idx(i, j)] = w_t / q;
    }

  std::vector<double> out(g.num_nodes());
  const int dim = g.domain.n;
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j <= nt; ++j) {
      const double gpsi = -g.rho(i) * g.dphi[j] / g.phi[j];
      const double dWr_r = d_rho(Wr, i, j, -1.0) / g.phi[j];
      const double dWt_t =
          d_t(Wt, i, j, -1.0) + gpsi * d_rho(Wt, i, j, +1.0);
      double div = dWr_r + dWt_t;
      if (i == 0)
        div += (dim - 1) * dWr_r; // r -> 0 limit of (n-1) Wr / r
      else
        div += (dim - 1) * Wr[g.idx(i, j)] / g.r(i, j);
      out[g.idx(i, j)] = -div - 1.0 / beta;
    }
  return out;
}

} // namespace serrinlab
