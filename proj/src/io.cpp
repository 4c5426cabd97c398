#include "serrinlab/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace serrinlab {

namespace {

using json = nlohmann::ordered_json;

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // map the byte offset reported by the parser to a line number
    size_t line = 1;
    for (size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("parse error at line " + std::to_string(line) + " in " +
                      path + ": " + e.what());
  }
}

// Serializer with floating-point values pinned to 17 significant digits, so
// identical inputs yield byte-identical artifacts regardless of the JSON
// library's shortest-round-trip heuristics.
void dump17(const json& j, std::string& out, int indent) {
  const std::string pad(indent, ' ');
  const std::string pad2(indent + 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) { out += "{}"; return; }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad2;
        out += json(it.key()).dump();
        out += ": ";
        dump17(it.value(), out, indent + 2);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) { out += "[]"; return; }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad2;
        dump17(v, out, indent + 2);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_g17(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

void write_json(const json& j, const std::string& path) {
  std::string text;
  dump17(j, text, 0);
  text += "\n";
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

json meta_block(std::uint64_t cfg_hash) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, cfg_hash);
  return json{{"version", kVersion}, {"config_hash", hash}};
}

bool power_of_two_in_range(int v) {
  return v >= 16 && v <= 1024 && (v & (v - 1)) == 0;
}

json domain_to_json(const ProfileDomain& d) {
  return json{{"n", d.n},
              {"lambda", d.half_period},
              {"coeffs", d.cosine_coeffs}};
}

ProfileDomain domain_from_json(const json& j, const std::string& where) {
  if (!j.contains("n") || !j.contains("lambda") || !j.contains("coeffs"))
    throw ConfigError(where + ": expected keys n, lambda, coeffs");
  return build_profile(j["n"].get<int>(), j["lambda"].get<double>(),
                       j["coeffs"].get<std::vector<double>>());
}

} // namespace

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void validate_config(const RunConfig& cfg) {
  if (cfg.n < 1) throw ConfigError("n must be >= 1");
  if (!(cfg.base_radius > 0)) throw ConfigError("base_radius must be > 0");
  if (!(cfg.ds > 0)) throw ConfigError("ds must be > 0");
  if (!(cfg.s_max >= 0)) throw ConfigError("s_max must be >= 0");
  if (cfg.K < 2 || cfg.K > 32) throw ConfigError("K must lie in [2, 32]");
  for (int v : {cfg.branch_n_rho, cfg.branch_n_t, cfg.cert_n_rho,
                cfg.cert_n_t, cfg.tv_n, cfg.cmc_n_rho, cfg.cmc_n_t})
    if (!power_of_two_in_range(v))
      throw ConfigError("grid size " + std::to_string(v) +
                        " must be a power of two in [16, 1024]");
  if (!(cfg.tol_identity > 0) || !(cfg.tol_calib > 0))
    throw ConfigError("tolerances must be positive");
  if (cfg.slab_periods < 1) throw ConfigError("slab_periods must be >= 1");
  if (cfg.eps_list.size() < 2)
    throw ConfigError("eps_list needs at least two entries");
  for (size_t k = 0; k < cfg.eps_list.size(); ++k) {
    if (!(cfg.eps_list[k] > 0))
      throw ConfigError("eps_list entries must be positive");
    if (k > 0 && !(cfg.eps_list[k] < cfg.eps_list[k - 1]))
      throw ConfigError("eps_list must be strictly decreasing");
  }
  if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must be nonempty");
}

RunConfig parse_config(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_object()) throw ConfigError(path + ": config must be an object");
  RunConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    try {
      if (key == "n") cfg.n = v.get<int>();
      else if (key == "base_radius") cfg.base_radius = v.get<double>();
      else if (key == "s_max") cfg.s_max = v.get<double>();
      else if (key == "ds") cfg.ds = v.get<double>();
      else if (key == "K") cfg.K = v.get<int>();
      else if (key == "branch_n_rho") cfg.branch_n_rho = v.get<int>();
      else if (key == "branch_n_t") cfg.branch_n_t = v.get<int>();
      else if (key == "cert_n_rho") cfg.cert_n_rho = v.get<int>();
      else if (key == "cert_n_t") cfg.cert_n_t = v.get<int>();
      else if (key == "tv_n") cfg.tv_n = v.get<int>();
      else if (key == "cmc_n_rho") cfg.cmc_n_rho = v.get<int>();
      else if (key == "cmc_n_t") cfg.cmc_n_t = v.get<int>();
      else if (key == "tol_identity") cfg.tol_identity = v.get<double>();
      else if (key == "tol_calib") cfg.tol_calib = v.get<double>();
      else if (key == "slab_periods") cfg.slab_periods = v.get<int>();
      else if (key == "eps_list") cfg.eps_list = v.get<std::vector<double>>();
      else if (key == "workers") cfg.workers = v.get<int>();
      else if (key == "out_dir") cfg.out_dir = v.get<std::string>();
      else throw ConfigError(path + ": unknown config key \"" + key + "\"");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": bad value for \"" + key + "\": " + e.what());
    }
  }
  validate_config(cfg);
  return cfg;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  json j{{"n", cfg.n},
         {"base_radius", cfg.base_radius},
         {"s_max", cfg.s_max},
         {"ds", cfg.ds},
         {"K", cfg.K},
         {"branch_n_rho", cfg.branch_n_rho},
         {"branch_n_t", cfg.branch_n_t},
         {"cert_n_rho", cfg.cert_n_rho},
         {"cert_n_t", cfg.cert_n_t},
         {"tv_n", cfg.tv_n},
         {"cmc_n_rho", cfg.cmc_n_rho},
         {"cmc_n_t", cfg.cmc_n_t},
         {"tol_identity", cfg.tol_identity},
         {"tol_calib", cfg.tol_calib},
         {"slab_periods", cfg.slab_periods},
         {"eps_list", cfg.eps_list},
         {"workers", cfg.workers}};
  std::string canon;
  dump17(j, canon, 0);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void save_domain(const ProfileDomain& d, const std::string& path) {
  write_json(domain_to_json(d), path);
}

ProfileDomain load_domain(const std::string& path) {
  return domain_from_json(parse_json_file(path), path);
}

void save_branch(const std::vector<BranchPoint>& branch,
                 const std::string& path, std::uint64_t cfg_hash) {
  json pts = json::array();
  for (const auto& p : branch)
    pts.push_back(json{{"s", p.s},
                       {"n", p.domain.n},
                       {"lambda", p.lambda},
                       {"beta", p.beta},
                       {"coeffs", p.domain.cosine_coeffs},
                       {"residual_norm", p.residual_norm}});
  write_json(json{{"meta", meta_block(cfg_hash)}, {"points", pts}}, path);
}

std::vector<BranchPoint> load_branch(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_object() || !j.contains("points") || !j["points"].is_array())
    throw ConfigError(path + ": expected object with a \"points\" array");
  std::vector<BranchPoint> branch;
  for (const auto& rec : j["points"]) {
    for (const char* key : {"s", "n", "lambda", "beta", "coeffs",
                            "residual_norm"})
      if (!rec.contains(key))
        throw ConfigError(path + ": branch record missing key \"" +
                          std::string(key) + "\"");
    BranchPoint p;
    p.s = rec["s"].get<double>();
    p.lambda = rec["lambda"].get<double>();
    p.beta = rec["beta"].get<double>();
    p.residual_norm = rec["residual_norm"].get<double>();
    p.domain = build_profile(rec["n"].get<int>(), p.lambda,
                             rec["coeffs"].get<std::vector<double>>());
    branch.push_back(std::move(p));
  }
  return branch;
}

void save_report(const CheegerCalibrationReport& report, double s,
                 bool verdict, const std::string& path,
                 std::uint64_t cfg_hash) {
  write_json(json{{"meta", meta_block(cfg_hash)},
                  {"s", s},
                  {"volume", report.volume},
                  {"perimeter", report.perimeter},
                  {"quotient", report.quotient},
                  {"beta", report.beta},
                  {"identity_gap", report.identity_gap},
                  {"calib_sup", report.calib_sup},
                  {"calib_div_residual", report.calib_div_residual},
                  {"calib_boundary_gap", report.calib_boundary_gap},
                  {"calib_wall_gap", report.calib_wall_gap},
                  {"tv_min_value", report.tv_min_value},
                  {"subset_oracle_min", report.subset_oracle_min},
                  {"one_laplacian_check", verdict}},
             path);
}

void save_cmc_log(const CMCSolution& sol, double s, const std::string& path,
                  std::uint64_t cfg_hash) {
  json levels = json::array();
  for (const auto& f : sol.w_fields) {
    double qmin = f.contact.empty() ? 0.0 : f.contact.front();
    double qmax = qmin;
    for (double q : f.contact) {
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
    }
    levels.push_back(json{{"eps", f.eps},
                          {"newton_iters", f.newton_iters},
                          {"residual_norm", f.residual_norm},
                          {"energy", f.energy},
                          {"zero_energy", f.zero_energy},
                          {"contact_min", qmin},
                          {"contact_max", qmax}});
  }
  write_json(json{{"meta", meta_block(cfg_hash)},
                  {"s", s},
                  {"beta", sol.beta},
                  {"levels", levels},
                  {"cauchy_diffs", sol.cauchy_diffs},
                  {"cauchy_noise_floor", sol.cauchy_noise_floor},
                  {"curvature_residual", sol.curvature_residual},
                  {"periodicity_residual", sol.periodicity_residual},
                  {"bounded", sol.bounded}},
             path);
}

void export_torsion_csv(const TorsionSolution& sol, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "rho,t,r,u,u_r,u_t\n";
  const auto& g = sol.grid;
  for (int i = 0; i <= g.n_rho; ++i)
    for (int j = 0; j <= g.n_t; ++j) {
      const int a = g.idx(i, j);
      out << format_g17(g.rho(i)) << ',' << format_g17(g.t(j)) << ','
          << format_g17(g.r(i, j)) << ',' << format_g17(sol.u[a]) << ','
          << format_g17(sol.u_r[a]) << ',' << format_g17(sol.u_t[a]) << '\n';
    }
}

void export_field_csv(const MappedGrid& g, const std::vector<double>& w,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "rho,t,r,w\n";
  for (int i = 0; i <= g.n_rho; ++i)
    for (int j = 0; j <= g.n_t; ++j)
      out << format_g17(g.rho(i)) << ',' << format_g17(g.t(j)) << ','
          << format_g17(g.r(i, j)) << ',' << format_g17(w[g.idx(i, j)])
          << '\n';
}

void export_tv_csv(const TvResult& tv, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "z,t,v\n";
  const double hz = tv.z_max / tv.nz;
  const double ht = (tv.t_max - tv.t_min) / tv.nt;
  for (int i = 0; i < tv.nz; ++i)
    for (int j = 0; j < tv.nt; ++j)
      out << format_g17((i + 0.5) * hz) << ','
          << format_g17(tv.t_min + (j + 0.5) * ht) << ','
          << format_g17(tv.minimizer[i * tv.nt + j]) << '\n';
}

} // namespace serrinlab
