#include "dosreg/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <numbers>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "dosreg/lemma_verify.hpp"

#ifndef DOSREG_VERSION_STRING
#define DOSREG_VERSION_STRING "0.0.0"
#endif

namespace dosreg {
namespace {

constexpr const char* kManifestName = "run_manifest.json";

std::string digest_hex(const EVP_MD* md, const std::string& content) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), out, &len, md, nullptr) != 1) {
    throw Error("digest computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(out[i]);
  }
  return hex.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("output directory not writable: cannot create " + path.string());
  out << content;
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool wants(const ExperimentConfig& c, const std::string& format) {
  return std::find(c.output.formats.begin(), c.output.formats.end(), format) !=
         c.output.formats.end();
}

McConfig mc_from(const RunSection& run) {
  McConfig mc;
  mc.n_samples = run.n_samples;
  mc.master_seed = run.seed;
  mc.workers = run.workers;
  mc.antithetic = run.antithetic;
  return mc;
}

nlohmann::json estimate_json(const Estimate& e) {
  return {{"mean_re", e.mean.real()},
          {"mean_im", e.mean.imag()},
          {"stderr", e.std_error},
          {"n_samples", e.n_samples}};
}

nlohmann::json fit_json(const DecayFit& f) {
  return {{"rate", f.rate},        {"intercept", f.intercept}, {"r_squared", f.r_squared},
          {"d_min", f.d_min},      {"d_max", f.d_max},         {"n_points", f.n_points}};
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

// Artifacts produced by one command, keyed by file name.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  bool checks_passed = true;
};

Artifacts run_curves(const ExperimentConfig& c, const ModelSpec& model,
                     const DisorderField& disorder, std::size_t volume, std::ostream& log) {
  const McConfig mc = mc_from(c.run);
  Artifacts art;
  std::vector<CurveRow> rows;
  const auto& cmd = c.run.command;
  if (cmd == "ids") {
    const auto curve = estimate_ids_curve(model, disorder, volume, c.run.energies, mc);
    for (std::size_t k = 0; k < curve.size(); ++k) rows.push_back({c.run.energies[k], 0.0, 0, curve[k].trace});
  } else {
    for (double eps : c.run.epsilons) {
      log << cmd << ": eps = " << eps << '\n';
      std::vector<Estimate> curve;
      int ell = 0;
      if (cmd == "dos") {
        curve = estimate_smoothed_dos_curve(model, disorder, volume, c.run.energies, eps, mc);
      } else {
        ell = c.run.ell;
        curve = estimate_dos_derivative_curve(model, disorder, volume, c.run.energies, eps, ell, mc);
      }
      for (std::size_t k = 0; k < curve.size(); ++k) rows.push_back({c.run.energies[k], eps, ell, curve[k]});
    }
  }
  if (wants(c, "csv")) art.files.emplace_back(cmd + ".csv", format_curve_csv(rows));
  return art;
}

Artifacts run_fracmom(const ExperimentConfig& c, const ModelSpec& model,
                      const DisorderField& disorder, std::size_t volume, std::ostream& log) {
  const McConfig mc = mc_from(c.run);
  std::vector<std::size_t> targets;
  std::vector<double> distances;
  for (std::size_t d = 1; d <= c.run.max_distance; ++d) {
    const auto site = model.space.site_at_distance(0, static_cast<int>(d));
    if (!site || *site >= volume) {
      throw ConfigError("run.max_distance", "no site at distance " + std::to_string(d) +
                                                " inside the volume");
    }
    targets.push_back(*site);
    distances.push_back(static_cast<double>(d));
  }
  std::vector<CurveRow> rows;
  std::vector<double> index;
  nlohmann::json fits = nlohmann::json::array();
  for (double eps : c.run.epsilons) {
    for (double e : c.run.energies) {
      log << "fracmom: E = " << e << ", eps = " << eps << '\n';
      const auto profile = estimate_fractional_moment_profile(
          model, disorder, volume, ComplexShift(e, eps), 0, targets, c.run.s, mc);
      std::vector<DecayPoint> points;
      for (std::size_t k = 0; k < profile.size(); ++k) {
        rows.push_back({e, eps, 0, profile[k]});
        index.push_back(distances[k]);
        points.push_back({distances[k], profile[k]});
      }
      nlohmann::json entry = {{"E", e}, {"epsilon", eps}, {"s", c.run.s}};
      try {
        entry["fit"] = fit_json(fit_decay(points));
      } catch (const ValidationError& err) {
        entry["fit"] = nullptr;
        entry["note"] = err.what();
      }
      fits.push_back(entry);
    }
  }
  Artifacts art;
  if (wants(c, "csv")) art.files.emplace_back("fracmom.csv", format_curve_csv(rows, "distance", index));
  if (wants(c, "json")) {
    art.files.emplace_back("fracmom_fit.json",
                           nlohmann::json({{"preset", c.run.preset}, {"fits", fits}}).dump(2) + "\n");
  }
  return art;
}

Artifacts run_telescope(const ExperimentConfig& c, const ModelSpec& model,
                        const DisorderField& disorder, std::ostream& log) {
  const McConfig mc = mc_from(c.run);
  const int ell = c.run.ell;
  std::vector<CurveRow> rows;
  std::vector<double> index;
  nlohmann::json series = nlohmann::json::array();
  for (double eps : c.run.epsilons) {
    for (double e : c.run.energies) {
      log << "telescope: E = " << e << ", eps = " << eps << '\n';
      const ComplexShift z(e, eps);
      const TelescopeReport rep =
          telescope_series_diagnostic(model, disorder, c.run.k_min, c.run.k_max, z, ell, mc);
      for (const auto& t : rep.terms) {
        rows.push_back({e, eps, ell, t.estimate});
        index.push_back(static_cast<double>(t.k));
      }
      const std::size_t base_sites = c.run.k_min + 1;
      const std::size_t direct_sites = c.run.k_max + 2;
      const Estimate base = estimate_dos_derivative(model, disorder, base_sites, z, ell, mc);
      const Estimate direct = estimate_dos_derivative(model, disorder, direct_sites, z, ell, mc);
      nlohmann::json partial = nlohmann::json::array();
      for (std::size_t i = 0; i < rep.partial_sums.size(); ++i) {
        partial.push_back({{"K", rep.terms[i].k},
                           {"re", rep.partial_sums[i].real()},
                           {"im", rep.partial_sums[i].imag()},
                           {"stderr", rep.partial_sum_errors[i]}});
      }
      series.push_back({{"E", e},
                        {"epsilon", eps},
                        {"ell", ell},
                        {"fit", rep.fit ? fit_json(*rep.fit) : nlohmann::json(nullptr)},
                        {"slope", rep.slope ? nlohmann::json(*rep.slope) : nlohmann::json(nullptr)},
                        {"all_terms_zero", rep.all_terms_zero},
                        {"summability_supported", rep.summability_supported},
                        {"note", rep.note},
                        {"partial_sums", partial},
                        {"base_term", estimate_json(base)},
                        {"direct_estimate", estimate_json(direct)}});
    }
  }
  Artifacts art;
  if (wants(c, "csv")) art.files.emplace_back("telescope.csv", format_curve_csv(rows, "K", index));
  if (wants(c, "json")) {
    art.files.emplace_back("telescope_summary.json",
                           nlohmann::json({{"preset", c.run.preset}, {"series", series}}).dump(2) + "\n");
  }
  return art;
}

std::vector<VerificationReport> verification_suite(const ExperimentConfig& c, std::ostream& log) {
  const auto& v = c.verify;
  const unsigned workers = c.run.workers;
  std::vector<VerificationReport> reports;

  {
    log << "verify: finite perturbations\n";
    Rng rng(mix_seed(v.seed, 101));
    FiniteSmoothSetup setup;
    setup.a = random_hermitian(4, rng);
    setup.covering = coordinate_covering(4);
    setup.density = SingleSiteDensity(c.disorder.order);
    setup.ell = std::min(1, setup.density.smoothness());
    setup.eps = 0.2;
    setup.energies = linspace(-2.0, 2.0, 11);
    reports.push_back(verify_finite_smooth(setup, 5e-3));
  }
  {
    log << "verify: averaged resolvent bound\n";
    ResolventAverageSetup setup;
    setup.corpus.instances = v.instances;
    setup.corpus.seed = v.seed;
    setup.s = v.s;
    setup.workers = workers;
    reports.push_back(verify_resolvent_average_bound(setup));
  }
  {
    log << "verify: semigroup Hoelder bound\n";
    SemigroupSetup setup;
    setup.corpus.instances = v.semigroup_pairs;
    setup.corpus.dim_min = 1;
    setup.corpus.dim_max = 8;
    setup.corpus.seed = mix_seed(v.seed, 2);
    setup.workers = workers;
    reports.push_back(verify_semigroup_hoelder(setup));
  }
  {
    log << "verify: resolvent / semigroup identity\n";
    SemigroupIdentitySetup setup;
    setup.corpus.instances = v.identity_instances;
    setup.corpus.dim_min = 1;
    setup.corpus.dim_max = 6;
    setup.corpus.seed = mix_seed(v.seed, 3);
    setup.t_max = v.t_max;
    setup.workers = workers;
    reports.push_back(verify_resolvent_semigroup_identity(setup));
  }
  {
    log << "verify: spectral averaging (scalar)\n";
    SpectralAveragingSetup setup;
    setup.a = MatrixC::Zero(1, 1);
    setup.b = MatrixC::Identity(1, 1);
    setup.phi = VectorC::Ones(1);
    setup.energies = linspace(0.0, 1.0, 201);
    setup.epsilons = {1e-3};
    VerificationReport rep = verify_spectral_averaging(setup);
    rep.operation = "spectral_averaging_scalar";
    const double target = std::numbers::pi * setup.mu.sup_norm(0);
    const double sup = rep.metrics["sups"][0].get<double>();
    rep.add_check("sup_vs_pi_density_sup", std::abs(sup / target - 1.0), 0.01);
    reports.push_back(std::move(rep));
  }
  {
    log << "verify: spectral averaging (6 x 6)\n";
    Corpus corpus;
    corpus.dim_min = corpus.dim_max = 6;
    corpus.seed = mix_seed(v.seed, 4);
    VerificationReport merged;
    merged.operation = "spectral_averaging_corpus";
    nlohmann::json per_instance = nlohmann::json::array();
    double worst = -1.0;
    for (std::size_t i = 0; i < 8; ++i) {
      Rng rng = corpus.stream(i);
      SpectralAveragingSetup setup;
      setup.a = random_hermitian(6, rng);
      setup.b = MatrixC::Identity(6, 6);
      VectorC phi(6);
      for (auto& x : phi) x = cplx(standard_normal(rng), standard_normal(rng));
      setup.phi = phi / phi.norm();
      Eigen::SelfAdjointEigenSolver<MatrixC> eig(setup.a, Eigen::EigenvaluesOnly);
      setup.energies = linspace(eig.eigenvalues().minCoeff() - 0.25,
                                eig.eigenvalues().maxCoeff() + 1.25, 200);
      setup.epsilons = v.averaging_epsilons;
      setup.stability = v.averaging_stability;
      const VerificationReport rep = verify_spectral_averaging(setup);
      per_instance.push_back(rep.metrics);
      for (const auto& chk : rep.checks) {
        merged.add_check(chk.name + "_instance_" + std::to_string(i), chk.value, chk.bound);
      }
      const double drift = rep.checks.back().value;
      if (drift > worst) {
        worst = drift;
        merged.witness = rep.witness;
        merged.witness["instance"] = i;
      }
    }
    merged.metrics["instances"] = per_instance;
    merged.metrics["worst_drift"] = worst;
    merged.tolerances["stability"] = v.averaging_stability;
    reports.push_back(std::move(merged));
  }
  {
    log << "verify: boundary values\n";
    BoundaryDerivativeSetup setup;
    setup.rho = SingleSiteDensity(2);
    setup.energies = linspace(0.05, 0.95, 19);
    reports.push_back(verify_boundary_derivatives(setup));
  }
  return reports;
}

Artifacts run_verify(const ExperimentConfig& c, std::ostream& log) {
  const auto reports = verification_suite(c, log);
  Artifacts art;
  nlohmann::json out = {{"reports", nlohmann::json::array()}};
  for (const auto& r : reports) {
    out["reports"].push_back(r.to_json());
    art.checks_passed = art.checks_passed && r.passed;
    log << "  " << (r.passed ? "PASS " : "FAIL ") << r.operation << '\n';
  }
  out["passed"] = art.checks_passed;
  // The report is the primary artifact; it is written regardless of formats.
  art.files.emplace_back("verify_report.json", out.dump(2) + "\n");
  return art;
}

std::filesystem::path resolve_out_dir(const ExperimentConfig& c, const std::filesystem::path& out) {
  if (!out.empty()) return out;
  if (!c.output.directory.empty()) return c.output.directory;
  if (const char* env = std::getenv("DOSREG_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

}  // namespace

std::string git_blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  return digest_hex(EVP_sha1(), blob);
}

std::string sha256_hex(const std::string& content) { return digest_hex(EVP_sha256(), content); }

std::string code_version() { return std::string("dosreg ") + DOSREG_VERSION_STRING; }

std::string format_curve_csv(const std::vector<CurveRow>& rows, const std::string& index_column,
                             const std::vector<double>& index_values) {
  require(index_column.empty() || index_values.size() == rows.size(),
          "format_curve_csv: one index value per row required");
  std::string out;
  if (!index_column.empty()) out += index_column + ",";
  out += "E,epsilon,ell,mean_re,mean_im,stderr,n_samples\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!index_column.empty()) out += fmt17(index_values[i]) + ",";
    out += fmt17(r.energy) + "," + fmt17(r.eps) + "," + std::to_string(r.ell) + "," +
           fmt17(r.estimate.mean.real()) + "," + fmt17(r.estimate.mean.imag()) + "," +
           fmt17(r.estimate.std_error) + "," + std::to_string(r.estimate.n_samples) + "\n";
  }
  return out;
}

RunOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                          std::ostream& log) {
  validate_config(config);
  const auto start = std::chrono::steady_clock::now();
  const std::filesystem::path dir = resolve_out_dir(config, out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("output directory not writable: " + dir.string());

  Artifacts art;
  const auto& cmd = config.run.command;
  if (cmd == "verify") {
    art = run_verify(config, log);
  } else {
    const ModelSpec model = build_model(config.model);
    const DisorderField disorder = build_disorder(config.disorder);
    const std::size_t volume = config.run.volume == 0 ? model.n_sites() : config.run.volume;
    log << cmd << ": " << volume << " sites, " << config.run.n_samples << " samples, "
        << config.run.workers << " workers\n";
    if (cmd == "fracmom") art = run_fracmom(config, model, disorder, volume, log);
    else if (cmd == "telescope") art = run_telescope(config, model, disorder, log);
    else art = run_curves(config, model, disorder, volume, log);
  }

  RunOutcome outcome;
  outcome.checks_passed = art.checks_passed;
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& [name, content] : art.files) {
    write_file(dir / name, content);
    outcome.outputs.push_back(dir / name);
    outputs.push_back({{"file", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string text = serialize_config(config);
  const nlohmann::json manifest = {{"code_version", code_version()},
                                   {"command", cmd},
                                   {"config", config_to_json(config)},
                                   {"config_text", text},
                                   {"config_hash", git_blob_hash(text)},
                                   {"wall_time_seconds", wall},
                                   {"checks_passed", art.checks_passed},
                                   {"outputs", outputs}};
  outcome.manifest = dir / kManifestName;
  write_file(outcome.manifest, manifest.dump(2) + "\n");
  log << "wrote " << outcome.outputs.size() << " output(s) and " << outcome.manifest.string()
      << " in " << std::fixed << std::setprecision(2) << wall << " s\n";
  log.unsetf(std::ios::floatfield);
  return outcome;
}

int reproduce_manifest(const std::filesystem::path& manifest_path,
                       std::optional<unsigned> workers_override, std::ostream& log) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!manifest.contains("config") || !manifest.contains("outputs")) {
    throw ValidationError("manifest lacks config or outputs");
  }
  if (manifest.value("code_version", "") != code_version()) {
    log << "warning: manifest written by '" << manifest.value("code_version", "?")
        << "', running " << code_version() << '\n';
  }
  ExperimentConfig config = config_from_json(manifest["config"]);
  if (git_blob_hash(serialize_config(config)) != manifest.value("config_hash", "")) {
    log << "warning: embedded config does not match its recorded hash\n";
  }
  if (workers_override) config.run.workers = *workers_override;
  config.output.directory.clear();

  const std::filesystem::path source_dir = manifest_path.parent_path();
  const std::filesystem::path scratch =
      std::filesystem::temp_directory_path() /
      ("dosreg-reproduce-" + std::to_string(::getpid()) + "-" +
       std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  std::ostringstream quiet;
  const RunOutcome fresh = run_experiment(config, scratch, quiet);

  int mismatches = 0;
  for (const auto& entry : manifest["outputs"]) {
    const std::string name = entry.at("file").get<std::string>();
    const auto original_path = source_dir / name;
    const auto fresh_path = scratch / name;
    if (!std::filesystem::exists(original_path) || !std::filesystem::exists(fresh_path)) {
      log << "MISMATCH " << name << ": file missing\n";
      ++mismatches;
      continue;
    }
    const std::string original = read_file(original_path);
    const std::string again = read_file(fresh_path);
    if (sha256_hex(original) != entry.value("sha256", "")) {
      log << "warning: " << name << " does not match its recorded checksum\n";
    }
    if (original == again) {
      log << "identical " << name << '\n';
      continue;
    }
    ++mismatches;
    std::istringstream a(original);
    std::istringstream b(again);
    std::string la;
    std::string lb;
    std::size_t row = 0;
    while (true) {
      const bool ga = static_cast<bool>(std::getline(a, la));
      const bool gb = static_cast<bool>(std::getline(b, lb));
      ++row;
      if (!ga && !gb) break;
      if (!ga || !gb || la != lb) {
        log << "MISMATCH " << name << " at row " << row << ":\n  recorded:   " << (ga ? la : "<eof>")
            << "\n  reproduced: " << (gb ? lb : "<eof>") << '\n';
        break;
      }
    }
  }
  std::filesystem::remove_all(scratch);
  (void)fresh;
  return mismatches == 0 ? 0 : 1;
}

}  // namespace dosreg
