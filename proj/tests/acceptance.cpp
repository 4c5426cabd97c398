// Acceptance gate: one [PASS]/[FAIL] line per criterion, nonzero exit on any
// failure. Each criterion is self-contained apart from the shared branch.
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "serrinlab/cheeger.hpp"
#include "serrinlab/cmc.hpp"
#include "serrinlab/geometry.hpp"
#include "serrinlab/serrin_finder.hpp"
#include "serrinlab/torsion.hpp"

using namespace serrinlab;

namespace {
const double kPi = std::acos(-1.0);

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

// shared branch state (criterion 3 fills it; 2, 4, 5, 6, 8, 9 reuse it)
std::vector<BranchPoint> g_branch;
double g_lambda_star = 0.0;

double cap_linf(const CmcField& f, double R, double eps) {
  const double off = std::sqrt(R * R - (R - eps) * (R - eps));
  double err = 0.0;
  for (int i = 0; i <= f.grid.n_rho; ++i)
    for (int j = 0; j <= f.grid.n_t; ++j) {
      const double r = f.grid.r(i, j);
      err = std::max(err, std::abs(f.w[f.grid.idx(i, j)] -
                                   (std::sqrt(R * R - r * r) - off)));
    }
  return err;
}

void criterion_1(Check& c) {
  for (int n : {1, 2, 3}) {
    const auto d = build_profile(n, kPi, {1.0});
    const auto sol = solve_torsion(generate_grid(d, 256, 256));
    double err = 0.0;
    for (int i = 0; i <= 256; ++i)
      for (int j = 0; j <= 256; ++j) {
        const double r = sol.grid.r(i, j);
        err = std::max(err, std::abs(sol.u[sol.grid.idx(i, j)] -
                                     (1.0 - r * r) / (2 * n)));
      }
    c.require(err <= 1e-4,
              "n=" + std::to_string(n) + " Linf=" + fmt(err) + " at 256^2");
    c.require(std::abs(sol.beta_mean - 1.0 / n) <= 1e-6,
              "n=" + std::to_string(n) + " beta off by " +
                  fmt(std::abs(sol.beta_mean - 1.0 / n)));
  }
  // cylinders are quadratic and stencil-exact, so the convergence order is
  // observed on a wavy profile against a nested fine-grid reference
  const auto d = build_profile(2, kPi, {1.0, 0.1});
  const auto ref = solve_torsion(generate_grid(d, 512, 512));
  double prev = 0.0;
  for (int k = 0; k < 3; ++k) {
    const int nr = 64 << k, stride = 512 / nr;
    const auto sol = solve_torsion(generate_grid(d, nr, nr));
    double err = 0.0;
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j <= nr; ++j)
        err = std::max(err,
                       std::abs(sol.u[sol.grid.idx(i, j)] -
                                ref.u[ref.grid.idx(stride * i, stride * j)]));
    if (k > 0) {
      const double order = std::log2(prev / err);
      c.require(order >= 1.9, "order=" + fmt(order) + " < 1.9");
    }
    prev = err;
  }
}

void criterion_2(Check& c) {
  for (int n : {1, 2}) {
    const auto d = build_profile(n, kPi, {1.0});
    const auto sol = solve_torsion(generate_grid(d, 256, 32));
    for (double eps : {0.05, 0.1, 0.25}) {
      const double ce = gradient_bound_margin(sol, eps);
      c.require(std::abs(ce - eps) <= 2e-3,
                "n=" + std::to_string(n) + " c_eps(" + fmt(eps) + ")=" +
                    fmt(ce));
    }
  }
  c.require(!g_branch.empty(), "branch unavailable");
  for (const auto& p : g_branch) {
    const auto sol = solve_torsion(generate_grid(p.domain, 128, 128));
    const double ce = gradient_bound_margin(sol, 0.01);
    c.require(ce > 0.0,
              "c_0.01 = " + fmt(ce) + " <= 0 at s=" + fmt(p.s));
  }
}

void criterion_3(Check& c) {
  FinderOptions o; // defaults: K=8, 96^2 Richardson pair, tol 1e-8
  g_lambda_star = detect_bifurcation_period(1, 1.0, o);
  const double lam2 = detect_bifurcation_period(1, 2.0, o);
  c.require(std::abs(lam2 - 2 * g_lambda_star) <= 1e-5,
            "scale law gap " + fmt(std::abs(lam2 - 2 * g_lambda_star)));

  const auto start = newton_solve_profile(
      build_profile(1, g_lambda_star, {1.0}), 0.0, o);
  const auto res = continue_branch(start, 0.1, 0.02, o);
  c.require(!res.failed_s.has_value(),
            res.failed_s ? "continuation failed at s=" + fmt(*res.failed_s)
                         : "");
  c.require(res.points.size() == 6,
            "expected 6 points, got " + std::to_string(res.points.size()));
  for (const auto& p : res.points)
    c.require(p.residual_norm <= 1e-8,
              "residual " + fmt(p.residual_norm) + " at s=" + fmt(p.s));
  g_branch = res.points;

  // beta evenness: mirror coefficients seed the -s solve
  for (double s : {0.1, 0.04}) {
    const BranchPoint* plus = nullptr;
    for (const auto& p : g_branch)
      if (std::abs(p.s - s) < 1e-12) plus = &p;
    if (!plus) continue;
    auto coeffs = plus->domain.cosine_coeffs;
    for (size_t k = 1; k < coeffs.size(); k += 2) coeffs[k] = -coeffs[k];
    const auto minus = newton_solve_profile(
        build_profile(1, plus->lambda, coeffs), -s, o);
    c.require(std::abs(minus.beta - plus->beta) <= 1e-8,
              "beta(" + fmt(s) + ") evenness gap " +
                  fmt(std::abs(minus.beta - plus->beta)));
  }
}

void criterion_4(Check& c) {
  c.require(!g_branch.empty(), "branch unavailable");
  for (const auto& p : g_branch) {
    const Slab slab{0.0, p.lambda};
    const double gap =
        std::abs(cheeger_quotient(p.domain, slab) - 1.0 / p.beta);
    c.require(gap <= 1e-6, "identity gap " + fmt(gap) + " at s=" + fmt(p.s));
  }
  for (int n : {1, 2}) {
    const auto d = build_profile(n, kPi, {1.0});
    const double q = cheeger_quotient(d, Slab{0.0, kPi});
    c.require(std::abs(q - n) <= 1e-12, "cylinder quotient n=" +
                                            std::to_string(n));
    c.require(std::abs(cheeger_quotient(d, Slab{0.0, 2 * kPi}) - q) <= 1e-12,
              "slab doubling n=" + std::to_string(n));
  }
}

void criterion_5(Check& c) {
  c.require(!g_branch.empty(), "branch unavailable");
  for (const auto& p : g_branch) {
    const auto sol = solve_torsion(generate_grid(p.domain, 256, 256));
    // The raw 256^2 serrin residual floors near 1e-6 by discretization even
    // though the shape itself is converged to 1e-8 (criterion 3); relax the
    // precheck to sit above that floor.
    const auto rep = verify_calibration(sol, Slab{0.0, p.lambda}, 1e-5);
    const std::string at = " at s=" + fmt(p.s);
    c.require(rep.calib_sup <= 1 + 1e-3, "sup=" + fmt(rep.calib_sup) + at);
    c.require(rep.calib_div_residual <= 5e-4,
              "div=" + fmt(rep.calib_div_residual) + at);
    c.require(rep.calib_boundary_gap <= 5e-4,
              "bdy=" + fmt(rep.calib_boundary_gap) + at);
    c.require(rep.calib_wall_gap <= 5e-4,
              "wall=" + fmt(rep.calib_wall_gap) + at);
  }
  // exact fields on the constant profile: stencil-level accuracy
  const auto d = build_profile(2, kPi, {1.0});
  const auto rep =
      verify_calibration(solve_torsion(generate_grid(d, 256, 32)),
                         Slab{0.0, kPi});
  c.require(rep.calib_div_residual <= 1e-8,
            "cylinder div=" + fmt(rep.calib_div_residual));
  c.require(rep.calib_boundary_gap <= 1e-8,
            "cylinder bdy=" + fmt(rep.calib_boundary_gap));
  c.require(rep.calib_wall_gap <= 1e-10,
            "cylinder wall=" + fmt(rep.calib_wall_gap));
}

void criterion_6(Check& c) {
  c.require(!g_branch.empty(), "branch unavailable");
  auto run_point = [&](const ProfileDomain& dom, double beta,
                       const std::string& tag) {
    const Slab slab{0.0, dom.half_period};
    const auto sol = solve_torsion(generate_grid(dom, 128, 128));
    TvOptions opts;
    opts.calibration = &sol;
    const auto tv = tv_relaxed_minimize(dom, slab, beta, 128, 128, opts);
    c.require(tv.min_value >= -2e-3 && tv.min_value <= 2e-3,
              tag + " tv value " + fmt(tv.min_value));
    // beta inflated x1.25: Omega itself drops the value below -1e-2
    const auto inflated =
        tv_relaxed_minimize(dom, slab, beta / 1.25, 128, 128);
    c.require(inflated.min_value <= -1e-2,
              tag + " inflated value " + fmt(inflated.min_value));
    const double q = cheeger_quotient(dom, slab);
    const double oracle = subset_oracle(dom, slab, 64);
    c.require(oracle >= q - 1e-3,
              tag + " subset oracle " + fmt(oracle) + " < " + fmt(q));
  };
  run_point(build_profile(1, kPi, {1.0}), 1.0, "cylinder");
  for (const auto& p : g_branch)
    if (std::abs(p.s - 0.1) < 1e-12 || std::abs(p.s - 0.04) < 1e-12)
      run_point(p.domain, p.beta, "s=" + fmt(p.s));
}

void criterion_7(Check& c) {
  for (int n : {1, 2}) {
    const auto d = build_profile(n, 2.0, {1.0});
    const auto tor = solve_torsion(generate_grid(d, 256, 32));
    CmcOptions o;
    o.n_rho = 256;
    o.n_t = 32;
    for (double eps : {0.1, 0.05, 0.025}) {
      const auto f = solve_cmc_eps(tor, eps, o);
      const std::string at =
          " n=" + std::to_string(n) + " eps=" + fmt(eps);
      if (eps == 0.1) {
        const double err = cap_linf(f, 1.0, eps);
        c.require(err <= 5e-4, "cap Linf " + fmt(err) + at);
        const auto res = curvature_residual_field(f.grid, f.w, f.beta);
        double worst = 0.0;
        for (double x : res) worst = std::max(worst, std::abs(x));
        c.require(worst <= 5e-4, "curvature " + fmt(worst) + at);
      }
      for (double q : f.contact)
        c.require(std::abs(q - (1.0 - eps)) <= 2e-3,
                  "contact " + fmt(q) + at);
    }
  }
}

const BranchPoint* branch_at(double s) {
  for (const auto& p : g_branch)
    if (std::abs(p.s - s) < 1e-12) return &p;
  return nullptr;
}

void criterion_8(Check& c) {
  // the s-grid of criterion 3 carries s = 0.04 and 0.06; re-solve s = 0.05
  const BranchPoint* near = branch_at(0.04);
  c.require(near != nullptr, "branch unavailable");
  if (!near) return;
  FinderOptions fo;
  auto init = near->domain;
  init.cosine_coeffs[1] = 0.05;
  const auto p = newton_solve_profile(init, 0.05, fo);

  const auto tor = solve_torsion(generate_grid(p.domain, 128, 128));
  CmcOptions o;
  o.n_rho = 128;
  o.n_t = 128;
  const auto sol = solve_cmc_limit(tor, {0.1, 0.05, 0.025, 0.0125}, o);
  c.require(sol.bounded, "boundedness check failed");
  c.require(sol.curvature_residual <= 1e-3,
            "curvature " + fmt(sol.curvature_residual));
  c.require(sol.periodicity_residual <= 5e-4,
            "shift " + fmt(sol.periodicity_residual));
  double minphi = 1e300;
  for (int j = 0; j <= 1024; ++j)
    minphi = std::min(minphi, phi_eval(p.domain, p.lambda * j / 1024.0));
  for (const auto& f : sol.w_fields) {
    double qmin = 1.0;
    for (double q : f.contact) qmin = std::min(qmin, q);
    c.require(qmin >= 1.0 - 2 * f.eps / minphi,
              "contact " + fmt(qmin) + " at eps=" + fmt(f.eps));
  }
}

void criterion_9(Check& c) {
  auto agree = [&](const TorsionSolution& tor, const std::string& tag) {
    CmcOptions o;
    o.n_rho = 96;
    o.n_t = 32;
    const auto a = solve_cmc_limit(tor, {0.1, 0.05}, o);
    std::vector<double> guess((o.n_rho + 1) * (o.n_t + 1));
    for (int i = 0; i <= o.n_rho; ++i)
      for (int j = 0; j <= o.n_t; ++j)
        guess[i * (o.n_t + 1) + j] = 0.05 *
                                     (1.0 - double(i) / o.n_rho) *
                                     std::cos(2.0 * kPi * j / o.n_t);
    CmcOptions o2 = o;
    o2.initial_guess = &guess;
    const auto b = solve_cmc_limit(tor, {0.1, 0.05}, o2);
    double diff = 0.0;
    for (size_t k = 0; k < a.w_limit.size(); ++k)
      diff = std::max(diff, std::abs(a.w_limit[k] - b.w_limit[k]));
    c.require(diff <= 1e-8, tag + " restart gap " + fmt(diff));
  };
  agree(solve_torsion(generate_grid(build_profile(1, 2.0, {1.0}), 96, 32)),
        "cylinder");
  const BranchPoint* p = branch_at(0.04);
  c.require(p != nullptr, "branch unavailable");
  if (p) agree(solve_torsion(generate_grid(p->domain, 96, 32)), "s=0.04");
}

} // namespace

int main() {
  struct Criterion {
    const char* name;
    void (*fn)(Check&);
  };
  const Criterion criteria[] = {
      {"1 torsion oracle (closed forms, order, beta)", criterion_1},
      {"2 gradient estimate c_eps", criterion_2},
      {"3 Serrin branch (bifurcation, continuation, evenness)", criterion_3},
      {"4 Cheeger identity h = 1/beta", criterion_4},
      {"5 calibration / 1-Laplacian certificate", criterion_5},
      {"6 relaxed minimality and subset oracle", criterion_6},
      {"7 CMC cap oracle and vertical contact", criterion_7},
      {"8 limit scheme on the s=0.05 branch point", criterion_8},
      {"9 uniqueness up to constants", criterion_9},
  };
  // criterion 3 builds the branch the later ones reuse; run it first
  int order[] = {2, 0, 1, 3, 4, 5, 6, 7, 8};
  Check results[9];
  for (int k : order) {
    try {
      criteria[k].fn(results[k]);
    } catch (const std::exception& e) {
      results[k].ok = false;
      results[k].detail = std::string("exception: ") + e.what();
    }
  }
  int failures = 0;
  for (int k = 0; k < 9; ++k) {
    if (results[k].ok) {
      std::printf("[PASS] %s\n", criteria[k].name);
    } else {
      std::printf("[FAIL] %s — %s\n", criteria[k].name,
                  results[k].detail.c_str());
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}
