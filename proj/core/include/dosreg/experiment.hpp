#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dosreg/common.hpp"
#include "dosreg/disorder.hpp"
#include "dosreg/estimators.hpp"
#include "dosreg/graph_model.hpp"

namespace dosreg {

/// Validation failure tied to a config field, e.g. "run.s".
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string field, const std::string& message)
      : ValidationError(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline const std::vector<std::string> kCommands = {"dos",      "dos-deriv", "ids",
                                                   "fracmom",  "telescope", "verify"};

struct ModelSection {
  std::string graph = "box";  ///< "box" or "tree" (experimental)
  int dimension = 1;
  int half_width = 16;
  double hopping = 1.0;
  double flux = 0.0;
  double coupling = 1.0;
  std::size_t rank = 1;
  int branching = 2;
  int depth = 4;

  bool operator==(const ModelSection&) const = default;
};

struct DisorderSection {
  int order = 3;  ///< polynomial order p; smoothness m = p - 1

  bool operator==(const DisorderSection&) const = default;
};

struct RunSection {
  std::string command = "dos";
  std::vector<double> energies{0.5};
  std::vector<double> epsilons{0.5, 0.2, 0.1, 0.05};
  double s = kDefaultMomentExponent;
  int ell = 1;
  std::size_t n_samples = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t volume = 0;         ///< number of sites; 0 means the whole space
  std::size_t max_distance = 15;  ///< fracmom
  std::size_t k_min = 4;          ///< telescope
  std::size_t k_max = 20;
  std::string preset = "moments";  ///< "moments", "telescoping" or "custom"
  bool antithetic = true;
  bool experimental = false;

  bool operator==(const RunSection&) const = default;
};

struct VerifySection {
  std::size_t instances = 200;
  std::uint64_t seed = 2024;
  std::size_t semigroup_pairs = 10000;
  std::size_t identity_instances = 100;
  double t_max = 1e3;
  double s = 0.4;
  std::vector<double> averaging_epsilons{0.1, 0.01};
  double averaging_stability = 0.02;

  bool operator==(const VerifySection&) const = default;
};

struct OutputSection {
  std::string directory;             ///< empty: --out, then $DOSREG_OUTPUT_DIR, then "."
  std::vector<std::string> formats{"csv", "json"};

  bool operator==(const OutputSection&) const = default;
};

/// Sectioned key=value experiment description.
struct ExperimentConfig {
  ModelSection model;
  DisorderSection disorder;
  RunSection run;
  VerifySection verify;
  OutputSection output;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses the INI-style text; unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);
nlohmann::json config_to_json(const ExperimentConfig& config);
/// Inverse of config_to_json (same key set and validation as parse_config).
ExperimentConfig config_from_json(const nlohmann::json& json);
/// Range checks per module invariants; throws ConfigError with the field path.
void validate_config(const ExperimentConfig& config);

ModelSpec build_model(const ModelSection& section);
DisorderField build_disorder(const DisorderSection& section);

/// Git-style content hash: SHA-1 of "blob <size>\0<content>", hex.
std::string git_blob_hash(const std::string& content);
std::string sha256_hex(const std::string& content);

/// One CSV row of an estimator curve.
struct CurveRow {
  double energy = 0.0;
  double eps = 0.0;
  int ell = 0;
  Estimate estimate;
};

/// Header plus rows (E, epsilon, ell, mean_re, mean_im, stderr, n_samples),
/// floats with 17 significant digits. A non-empty `index_column` is written
/// first (distance or K) using `index_values`.
std::string format_curve_csv(const std::vector<CurveRow>& rows,
                             const std::string& index_column = {},
                             const std::vector<double>& index_values = {});

struct RunOutcome {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> outputs;
  /// False when a verification check failed (artifacts are still written).
  bool checks_passed = true;
};

/// Runs the configured command, writing artifacts and run_manifest.json into
/// out_dir (created if needed).
RunOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                          std::ostream& log);

/// Re-runs a manifest into a scratch directory and byte-compares every
/// output with the files recorded next to the manifest. Returns 0 iff all
/// are identical; mismatches are reported per file with the first differing
/// row.
int reproduce_manifest(const std::filesystem::path& manifest,
                       std::optional<unsigned> workers_override, std::ostream& log);

std::string code_version();

}  // namespace dosreg
