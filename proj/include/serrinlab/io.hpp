#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "serrinlab/cheeger.hpp"
#include "serrinlab/cmc.hpp"
#include "serrinlab/geometry.hpp"
#include "serrinlab/serrin_finder.hpp"
#include "serrinlab/torsion.hpp"

namespace serrinlab {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr const char* kVersion = "1.0.0";

/// Parameters for a full pipeline run. All fields have working defaults;
/// parse_config overrides them from a JSON file.
struct RunConfig {
  int n = 1;
  double base_radius = 1.0;
  double s_max = 0.1;
  double ds = 0.02;
  int K = 8;
  int branch_n_rho = 64;  // continuation grids (Richardson pair base)
  int branch_n_t = 64;
  int cert_n_rho = 256;   // calibration certificate grid
  int cert_n_t = 256;
  int tv_n = 128;         // relaxed-minimality grid (tv_n x tv_n)
  int cmc_n_rho = 128;
  int cmc_n_t = 128;
  double tol_identity = 1e-6;
  double tol_calib = 5e-4;
  int slab_periods = 1;
  std::vector<double> eps_list = {0.1, 0.05, 0.025, 0.0125};
  int workers = 1;
  std::string out_dir = "out";
};

/// Throws ConfigError on any violated invariant (grid sizes must be powers
/// of two in [16, 1024], tolerances positive, eps list positive decreasing).
void validate_config(const RunConfig& cfg);

/// Reads a JSON config file; unknown keys are rejected, missing keys keep
/// their defaults. Validates before returning.
RunConfig parse_config(const std::string& path);

/// FNV-1a over the canonical serialized config; embedded in every artifact.
std::uint64_t config_hash(const RunConfig& cfg);

/// Fixed 17-significant-digit formatting used by all writers, so identical
/// inputs produce byte-identical files.
std::string format_g17(double x);

void save_domain(const ProfileDomain& d, const std::string& path);
ProfileDomain load_domain(const std::string& path);

void save_branch(const std::vector<BranchPoint>& branch,
                 const std::string& path, std::uint64_t cfg_hash);
std::vector<BranchPoint> load_branch(const std::string& path);

void save_report(const CheegerCalibrationReport& report, double s,
                 bool verdict, const std::string& path,
                 std::uint64_t cfg_hash);

void save_cmc_log(const CMCSolution& sol, double s, const std::string& path,
                  std::uint64_t cfg_hash);

void export_torsion_csv(const TorsionSolution& sol, const std::string& path);
void export_field_csv(const MappedGrid& g, const std::vector<double>& w,
                      const std::string& path);
void export_tv_csv(const TvResult& tv, const std::string& path);

} // namespace serrinlab
