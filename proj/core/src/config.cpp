#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dosreg/experiment.hpp"

namespace dosreg {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(field, "expected a number, got '" + t + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(field, "expected an integer, got '" + t + "'");
  }
  return v;
}

bool parse_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(field, "expected true or false, got '" + t + "'");
}

std::vector<double> parse_doubles(const std::string& field, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(field, item));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

using Section = std::vector<std::pair<std::string, std::string>>;

// Canonical key order; also the list of accepted keys.
std::vector<std::pair<std::string, Section>> to_sections(const ExperimentConfig& c) {
  return {
      {"model",
       {{"graph", c.model.graph},
        {"dimension", std::to_string(c.model.dimension)},
        {"half_width", std::to_string(c.model.half_width)},
        {"hopping", format_double(c.model.hopping)},
        {"flux", format_double(c.model.flux)},
        {"coupling", format_double(c.model.coupling)},
        {"rank", std::to_string(c.model.rank)},
        {"branching", std::to_string(c.model.branching)},
        {"depth", std::to_string(c.model.depth)}}},
      {"disorder", {{"order", std::to_string(c.disorder.order)}}},
      {"run",
       {{"command", c.run.command},
        {"energies", join_doubles(c.run.energies)},
        {"epsilons", join_doubles(c.run.epsilons)},
        {"s", format_double(c.run.s)},
        {"ell", std::to_string(c.run.ell)},
        {"n_samples", std::to_string(c.run.n_samples)},
        {"seed", std::to_string(c.run.seed)},
        {"workers", std::to_string(c.run.workers)},
        {"volume", std::to_string(c.run.volume)},
        {"max_distance", std::to_string(c.run.max_distance)},
        {"k_min", std::to_string(c.run.k_min)},
        {"k_max", std::to_string(c.run.k_max)},
        {"preset", c.run.preset},
        {"antithetic", c.run.antithetic ? "true" : "false"},
        {"experimental", c.run.experimental ? "true" : "false"}}},
      {"verify",
       {{"instances", std::to_string(c.verify.instances)},
        {"seed", std::to_string(c.verify.seed)},
        {"semigroup_pairs", std::to_string(c.verify.semigroup_pairs)},
        {"identity_instances", std::to_string(c.verify.identity_instances)},
        {"t_max", format_double(c.verify.t_max)},
        {"s", format_double(c.verify.s)},
        {"averaging_epsilons", join_doubles(c.verify.averaging_epsilons)},
        {"averaging_stability", format_double(c.verify.averaging_stability)}}},
      {"output",
       {{"directory", c.output.directory}, {"formats", join_strings(c.output.formats)}}},
  };
}

void assign(ExperimentConfig& c, const std::string& section, const std::string& key,
            const std::string& value) {
  const std::string f = section + "." + key;
  if (section == "model") {
    auto& m = c.model;
    if (key == "graph") m.graph = trim(value);
    else if (key == "dimension") m.dimension = parse_int<int>(f, value);
    else if (key == "half_width") m.half_width = parse_int<int>(f, value);
    else if (key == "hopping") m.hopping = parse_double(f, value);
    else if (key == "flux") m.flux = parse_double(f, value);
    else if (key == "coupling") m.coupling = parse_double(f, value);
    else if (key == "rank") m.rank = parse_int<std::size_t>(f, value);
    else if (key == "branching") m.branching = parse_int<int>(f, value);
    else if (key == "depth") m.depth = parse_int<int>(f, value);
    else throw ConfigError(f, "unknown key");
  } else if (section == "disorder") {
    if (key == "order") c.disorder.order = parse_int<int>(f, value);
    else if (key == "smoothness") c.disorder.order = parse_int<int>(f, value) + 1;
    else throw ConfigError(f, "unknown key");
  } else if (section == "run") {
    auto& r = c.run;
    if (key == "command") r.command = trim(value);
    else if (key == "energies") r.energies = parse_doubles(f, value);
    else if (key == "epsilons") r.epsilons = parse_doubles(f, value);
    else if (key == "s") r.s = parse_double(f, value);
    else if (key == "ell") r.ell = parse_int<int>(f, value);
    else if (key == "n_samples") r.n_samples = parse_int<std::size_t>(f, value);
    else if (key == "seed") r.seed = parse_int<std::uint64_t>(f, value);
    else if (key == "workers") r.workers = parse_int<unsigned>(f, value);
    else if (key == "volume") r.volume = parse_int<std::size_t>(f, value);
    else if (key == "max_distance") r.max_distance = parse_int<std::size_t>(f, value);
    else if (key == "k_min") r.k_min = parse_int<std::size_t>(f, value);
    else if (key == "k_max") r.k_max = parse_int<std::size_t>(f, value);
    else if (key == "preset") r.preset = trim(value);
    else if (key == "antithetic") r.antithetic = parse_bool(f, value);
    else if (key == "experimental") r.experimental = parse_bool(f, value);
    else throw ConfigError(f, "unknown key");
  } else if (section == "verify") {
    auto& v = c.verify;
    if (key == "instances") v.instances = parse_int<std::size_t>(f, value);
    else if (key == "seed") v.seed = parse_int<std::uint64_t>(f, value);
    else if (key == "semigroup_pairs") v.semigroup_pairs = parse_int<std::size_t>(f, value);
    else if (key == "identity_instances") v.identity_instances = parse_int<std::size_t>(f, value);
    else if (key == "t_max") v.t_max = parse_double(f, value);
    else if (key == "s") v.s = parse_double(f, value);
    else if (key == "averaging_epsilons") v.averaging_epsilons = parse_doubles(f, value);
    else if (key == "averaging_stability") v.averaging_stability = parse_double(f, value);
    else throw ConfigError(f, "unknown key");
  } else if (section == "output") {
    if (key == "directory") c.output.directory = trim(value);
    else if (key == "formats") c.output.formats = split_list(value);
    else throw ConfigError(f, "unknown key");
  } else {
    throw ConfigError(section, "unknown section");
  }
}

std::size_t site_count(const ModelSection& m) {
  if (m.graph == "tree") {
    std::size_t total = 0;
    std::size_t level = 1;
    for (int d = 0; d <= m.depth; ++d) {
      total += level;
      level *= static_cast<std::size_t>(m.branching);
    }
    return total;
  }
  std::size_t total = 1;
  for (int d = 0; d < m.dimension; ++d) total *= static_cast<std::size_t>(2 * m.half_width + 1);
  return total;
}

void field_check(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", std::string("malformed file: ") + e.message() + " (line " +
                                    std::to_string(e.line()) + ")");
  }
  ExperimentConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, "key outside of a section");
    }
    for (const auto& [key, value] : body) assign(config, section, key, value.data());
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  bool first = true;
  for (const auto& [section, entries] : to_sections(config)) {
    if (!first) out += '\n';
    first = false;
    out += "[" + section + "]\n";
    for (const auto& [key, value] : entries) out += key + " = " + value + "\n";
  }
  return out;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {
      {"model",
       {{"graph", c.model.graph},
        {"dimension", c.model.dimension},
        {"half_width", c.model.half_width},
        {"hopping", c.model.hopping},
        {"flux", c.model.flux},
        {"coupling", c.model.coupling},
        {"rank", c.model.rank},
        {"branching", c.model.branching},
        {"depth", c.model.depth}}},
      {"disorder", {{"order", c.disorder.order}}},
      {"run",
       {{"command", c.run.command},
        {"energies", c.run.energies},
        {"epsilons", c.run.epsilons},
        {"s", c.run.s},
        {"ell", c.run.ell},
        {"n_samples", c.run.n_samples},
        {"seed", c.run.seed},
        {"workers", c.run.workers},
        {"volume", c.run.volume},
        {"max_distance", c.run.max_distance},
        {"k_min", c.run.k_min},
        {"k_max", c.run.k_max},
        {"preset", c.run.preset},
        {"antithetic", c.run.antithetic},
        {"experimental", c.run.experimental}}},
      {"verify",
       {{"instances", c.verify.instances},
        {"seed", c.verify.seed},
        {"semigroup_pairs", c.verify.semigroup_pairs},
        {"identity_instances", c.verify.identity_instances},
        {"t_max", c.verify.t_max},
        {"s", c.verify.s},
        {"averaging_epsilons", c.verify.averaging_epsilons},
        {"averaging_stability", c.verify.averaging_stability}}},
      {"output", {{"directory", c.output.directory}, {"formats", c.output.formats}}},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& json) {
  if (!json.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig config;
  for (const auto& [section, body] : json.items()) {
    if (!body.is_object()) throw ConfigError(section, "expected an object");
    for (const auto& [key, value] : body.items()) {
      std::string text;
      if (value.is_string()) {
        text = value.get<std::string>();
      } else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          const auto& item = value[i];
          text += (i ? ", " : "");
          if (item.is_string()) text += item.get<std::string>();
          else if (item.is_number_float()) text += format_double(item.get<double>());
          else text += item.dump();
        }
      } else if (value.is_number_float()) {
        text = format_double(value.get<double>());
      } else {
        text = value.dump();
      }
      assign(config, section, key, text);
    }
  }
  return config;
}

void validate_config(const ExperimentConfig& c) {
  const auto& m = c.model;
  field_check(m.graph == "box" || m.graph == "tree", "model.graph", "must be box or tree");
  if (m.graph == "box") {
    field_check(m.dimension >= 1 && m.dimension <= 3, "model.dimension", "must lie in [1, 3]");
    field_check(m.half_width >= 0, "model.half_width", "must be >= 0");
  } else {
    field_check(m.branching >= 1, "model.branching", "must be >= 1");
    field_check(m.depth >= 0, "model.depth", "must be >= 0");
  }
  field_check(std::isfinite(m.hopping), "model.hopping", "must be finite");
  field_check(std::isfinite(m.flux), "model.flux", "must be finite");
  field_check(m.coupling > 0.0 && std::isfinite(m.coupling), "model.coupling", "must be > 0");
  field_check(m.rank >= 1 && m.rank <= 16, "model.rank", "must lie in [1, 16]");
  const std::size_t sites = site_count(m);
  field_check(sites * m.rank <= 4096, "model", "dimension exceeds 4096");

  field_check(c.disorder.order >= 1 && c.disorder.order <= 30, "disorder.order",
              "must lie in [1, 30]");
  const int smoothness = c.disorder.order - 1;

  const auto& r = c.run;
  field_check(std::find(kCommands.begin(), kCommands.end(), r.command) != kCommands.end(),
              "run.command", "unknown command '" + r.command + "'");
  field_check(!r.energies.empty(), "run.energies", "must not be empty");
  for (double e : r.energies) field_check(std::isfinite(e), "run.energies", "must be finite");
  field_check(!r.epsilons.empty(), "run.epsilons", "must not be empty");
  for (double e : r.epsilons) field_check(e > 0.0 && std::isfinite(e), "run.epsilons", "must be > 0");
  field_check(r.s > 0.0 && r.s < 1.0, "run.s", "must lie in (0, 1)");
  field_check(r.preset == "moments" || r.preset == "telescoping" || r.preset == "custom",
              "run.preset", "must be moments, telescoping or custom");
  if (r.preset == "telescoping") {
    field_check(r.s < kTelescopingExponentBound, "run.s", "telescoping preset requires s < 1/2");
  }
  field_check(r.ell >= 0 && r.ell <= 2, "run.ell", "must lie in [0, 2]");
  const bool derivative_run = r.command == "dos-deriv" || r.command == "telescope";
  if (derivative_run) {
    field_check(r.ell <= smoothness, "run.ell", "exceeds the density smoothness m = p - 1");
  }
  if (r.ell >= 1 && derivative_run) {
    field_check(c.disorder.order >= (r.ell == 2 ? 4 : 2), "disorder.order",
                "too small for a finite-variance derivative estimate");
  }
  field_check(r.n_samples >= 1, "run.n_samples", "must be >= 1");
  field_check(r.workers >= 1 && r.workers <= 256, "run.workers", "must lie in [1, 256]");
  field_check(r.volume <= sites, "run.volume", "exceeds the number of sites");
  field_check(r.max_distance >= 1, "run.max_distance", "must be >= 1");
  field_check(r.k_min <= r.k_max, "run.k_min", "must not exceed run.k_max");
  if (r.command == "telescope") {
    field_check(r.k_max + 2 <= sites, "run.k_max", "needs k_max + 2 sites in the model");
  }

  const auto& v = c.verify;
  field_check(v.instances >= 1, "verify.instances", "must be >= 1");
  field_check(v.semigroup_pairs >= 1, "verify.semigroup_pairs", "must be >= 1");
  field_check(v.identity_instances >= 1, "verify.identity_instances", "must be >= 1");
  field_check(v.t_max > 0.0, "verify.t_max", "must be > 0");
  field_check(v.s > 0.0 && v.s < 1.0, "verify.s", "must lie in (0, 1)");
  field_check(!v.averaging_epsilons.empty(), "verify.averaging_epsilons", "must not be empty");
  for (double e : v.averaging_epsilons) {
    field_check(e > 0.0, "verify.averaging_epsilons", "must be > 0");
  }
  field_check(v.averaging_stability > 0.0, "verify.averaging_stability", "must be > 0");

  for (const auto& f : c.output.formats) {
    field_check(f == "csv" || f == "json", "output.formats", "unknown format '" + f + "'");
  }
}

ModelSpec build_model(const ModelSection& m) {
  if (m.graph == "tree") {
    SiteSpace space = SiteSpace::bethe_tree(m.branching, m.depth);
    ProjectionFamily proj = ProjectionFamily::uniform(space.size(), m.rank);
    FreeOperatorSpec free = FreeOperatorSpec::nearest_neighbour(space, proj, m.hopping, m.flux);
    ModelSpec model{std::move(space), std::move(proj), std::move(free), m.coupling};
    model.validate();
    return model;
  }
  return make_box_model(m.dimension, m.half_width, m.hopping, m.coupling, m.rank, m.flux);
}

DisorderField build_disorder(const DisorderSection& section) {
  return DisorderField(SingleSiteDensity(section.order));
}

}  // namespace dosreg
