#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "magstep/geometry.hpp"
#include "magstep/model1d.hpp"
#include "magstep/operator2d.hpp"
#include "magstep/wkb.hpp"

namespace magstep {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct CurveSpec {
  std::string kind = "ellipse";  // ellipse | fourier | tabulated
  double semi_major = 2.0, semi_minor = 1.0;
  double radius = 1.0;
  std::map<int, double> cos;
  std::string path;
  int nodes = 4096;
};

CurveModel make_curve(const CurveSpec& spec);

struct ExponentWindow {
  CurveSpec curve;
  double x_lo = 30, x_hi = 90;  // S / h^{1/4}
  int points = 12;
  int n = 4096;
  double rel_tol = 0.05;
};

struct AcceptanceConfig {
  double a = -0.5;  // field ratio for criteria 5-10
  double theta0_lo = 0.5, theta0_hi = 1.0, xi0_tol = 1e-4;
  double degennes_beta_tol = 1e-5, degennes_symmetry_tol = 1e-6;
  std::vector<double> a_list{-0.9, -0.75, -0.5, -0.25, -0.1};
  double m1_tol = 1e-8, m3_tol = 1e-6, identity_tol = 1e-6, i2_tol = 1e-4, stationarity_tol = 1e-6;
  ExponentWindow exponent;
  ExponentWindow min_rule;
  CurveSpec wkb_curve;
  std::vector<int> wkb_orders{0, 1, 3};
  std::vector<double> wkb_hbars{0.05, 0.075, 0.1, 0.15, 0.2};
  double wkb_slack = 0.3;
  CurveSpec curve_2d;
  std::vector<double> ahk_hbars{0.001, 0.0015, 0.002, 0.003, 0.004, 0.005, 0.007, 0.01};
  int ahk_extra_terms = 1;
  double ahk_beta_tol = 0.01, ahk_c1_tol = 0.10, ahk_c2_tol = 0.15;
  int max_grid_sigma = 512, max_grid_tau = 256;
  std::vector<double> gap_hbars{0.015, 0.012, 0.01, 0.008, 0.006, 0.005, 0.004};
  double gap_action_tol = 0.10;
  double scan_inv_h_lo = 100.0, scan_inv_h_hi = 100.8;
  int scan_points = 24;
  double scan_spacing_tol = 0.20;
  StripGrid oracle_grid;
  double oracle_hbar = 0.2;
  int oracle_count = 4;
  double oracle_tol = 1e-10;
  std::array<double, 10> runtime_limits{5, 5, 30, 60, 60, 60, 120, 600, 1800, 10};
};

struct RunConfig {
  std::string model = "magnetic-step";  // magnetic-step | neumann | transversal
  double a = -0.5;
  std::vector<double> a_list{-1.0, -0.9, -0.75, -0.5, -0.25, -0.1};
  CurveSpec curve;
  FiberConfig fiber;
  WkbConfig wkb;
  double alpha = 0.0;          // phase constant when the WKB profile is not computed
  bool compute_alpha = true;   // magnetic-step: alpha_a from the transport profile
  std::vector<double> h_list{0.002, 0.003, 0.005, 0.0075, 0.01, 0.02, 0.03, 0.05};
  ExponentWindow effective;    // effective-gap sweep (curve taken from the top level)
  double noise_factor = 1e3;
  std::vector<int> wkb_orders{0, 1, 2, 3};
  std::vector<double> wkb_hbars{0.05, 0.075, 0.1, 0.15, 0.2};
  double eta = 0.125;
  StripGrid grid;
  double hbar = 0.05;          // solve2d
  int eigen_count = 4;
  double eigen_tol = 1e-11;
  bool single_well = false;
  bool export_coo = false;
  std::vector<double> ahk_hbars;  // empty: no fit in solve2d
  std::string cache_dir = ".magstep-cache";
  AcceptanceConfig acceptance;
};

RunConfig default_config();
// Missing keys take defaults, unknown keys are rejected.
RunConfig config_from_json(const Json& j);
Json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);
void validate_config(const RunConfig& cfg);
// Sorted keys, no whitespace.
std::string canonical_config(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::string sha256_hex(const std::string& data);

// File name -> contents, written verbatim under --out.
using FileSet = std::map<std::string, std::string>;

struct ResultRecord {
  std::string config_hash;
  std::string command;
  std::string timestamp;
  Json outputs;       // typed payload, no wall-clock data
  Json diagnostics;
  FileSet files;
  int exit_code = 0;
};

Json record_to_json(const ResultRecord& r);
ResultRecord record_from_json(const Json& j);

class Cache {
 public:
  explicit Cache(std::string dir) : dir_(std::move(dir)) {}
  std::string path_for(const std::string& key) const;
  // nullopt when missing or when the checksum does not match.
  std::optional<ResultRecord> load(const std::string& key) const;
  void store(const std::string& key, const ResultRecord& r) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

// Temp file in the target directory, then rename.
void atomic_write(const std::string& path, const std::string& contents);

struct RunOptions {
  std::string out_dir = ".";
  bool skip_2d = false;
  int jobs = 1;
  bool use_cache = true;
};

struct CsvTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
std::string format_csv(const CsvTable& t, const std::string& hash);
std::string format_number(double x);

ResultRecord cmd_constants(const RunConfig& cfg, const RunOptions& opt);
ResultRecord cmd_curve(const RunConfig& cfg, const RunOptions& opt);
ResultRecord cmd_predict(const RunConfig& cfg, const RunOptions& opt);
ResultRecord cmd_effective_gap(const RunConfig& cfg, const RunOptions& opt);
ResultRecord cmd_wkb_residual(const RunConfig& cfg, const RunOptions& opt);
ResultRecord cmd_solve2d(const RunConfig& cfg, const RunOptions& opt);
ResultRecord cmd_validate(const RunConfig& cfg, const RunOptions& opt);

const std::vector<std::string>& command_names();

// Cache lookup, dispatch, file output. Returns the record actually served.
ResultRecord run_command(const std::string& name, const RunConfig& cfg, const RunOptions& opt,
                         bool* from_cache = nullptr);
void write_outputs(const ResultRecord& r, const std::string& out_dir);

// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool skipped = false;
  double seconds = 0;
  double runtime_limit = 0;
  std::string detail;
  Json values;
};

struct AcceptanceReport {
  std::vector<CriterionResult> criteria;
  bool all_pass() const;
};

using CriterionSink = std::function<void(const CriterionResult&)>;

AcceptanceReport run_acceptance(const RunConfig& cfg, const RunOptions& opt,
                                const std::vector<int>& only = {},
                                const CriterionSink& sink = {});
std::string format_criterion(const CriterionResult& r);

}  // namespace magstep
