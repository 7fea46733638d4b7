#pragma once

/// \file config.hpp
/// \brief Experiment configuration: sectioned INI text with strict keys.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "reslab/error.hpp"
#include "reslab/io.hpp"

namespace reslab {

struct GridConfig {
  int dim = 1;
  double L = 20.0;
  int n = 4001;
};

struct PotentialConfig {
  std::string family = "poschl_teller";  ///< poschl_teller | square_well | coulomb | constant
  double ell = 2.0;
  double depth = -1.0;
  double width = 1.0;
  double c = -1.0;
  double alpha = 0.25;
  double center_x = 0.0;
  double center_y = 0.0;
  double split_radius = 1.0;
  double offset = 0.0;
  double p = 0.0;  ///< <= 0 selects the family default
};

struct NonlinearityConfig {
  std::string family = "arctan";  ///< zero | arctan | rational | constant
  double amplitude = 1.0;
  double width = 1.0;
  bool flip_half_line = false;
};

struct SpectralConfig {
  std::optional<double> ceiling;
  double tol_eig = 1e-8;
  double cluster_tol = 1e-6;
  std::string lambda0 = "value -1";  ///< "index k" (0-based) or "value v"
  double delta = 0.0;                ///< 0 selects the automatic window
  std::vector<double> morse_at;
};

struct ExperimentSection {
  std::uint64_t seed = 0x5eed;
  int workers = 0;  ///< 0 selects the hardware concurrency
  // branch
  std::string side = "below";  ///< below | above | both
  int points = 12;
  double growth_factor = 4.0;
  int window = 5;
  int tail = 6;
  double sandwich_bound = 10.0;
  double slope_tol = 1e-2;
  // solver
  double tol_fp = 1e-10;
  double tol_pde = 1e-8;
  double tol_lin = 1e-10;
  int max_iterations = 4000;
  std::optional<double> u_cap;
  // resonance
  int net_size = 64;
  int sample_budget = 20000;
  int probe_samples = 8;
  std::vector<double> probe_radii{1.0, 10.0, 100.0, 1000.0};
  // semiflow
  std::optional<double> lambda;  ///< default lambda0 - delta / 2
  double horizon = 10.0;
  std::optional<double> dt;
  double save_every = 0.1;
  std::string stop = "time";  ///< time | equilibrium | plateau
  double tol_eq = 1e-6;
  double init_amplitude = 1.0;
  double init_center = 0.0;
  double init_width = 1.0;
  bool snapshots = false;
  std::vector<double> tail_radii;
};

struct OutputConfig {
  std::string dir = "out";
};

struct ExperimentConfig {
  GridConfig grid;
  PotentialConfig potential;
  NonlinearityConfig nonlinearity;
  SpectralConfig spectral;
  ExperimentSection experiment;
  OutputConfig output;

  int effective_workers() const {
    if (experiment.workers > 0) return experiment.workers;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
  }
};

/// Parsed "index k" / "value v".
struct Lambda0Selector {
  bool by_index = false;
  int index = 0;
  double value = 0.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  require(res.ec == std::errc() && res.ptr == t.data() + t.size() && !t.empty(), ErrorCode::ConfigError,
          where + ": expected a number, got '" + text + "'");
  return v;
}

inline long long parse_int(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  require(res.ec == std::errc() && res.ptr == t.data() + t.size() && !t.empty(), ErrorCode::ConfigError,
          where + ": expected an integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorCode::ConfigError, where + ": expected a boolean, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::string spaced = text;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  std::stringstream ss(spaced);
  std::string item;
  while (ss >> item) out.push_back(parse_double(item, where));
  return out;
}

inline std::string join_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_shortest(v[i]);
  }
  return out;
}

/// Reads one section and rejects keys that are not consumed.
class SectionReader {
 public:
  SectionReader(const boost::property_tree::ptree& root, std::string name) : name_(std::move(name)) {
    if (auto child = root.get_child_optional(name_)) tree_ = *child;
  }

  std::optional<std::string> raw(const std::string& key) {
    known_.insert(key);
    if (auto v = tree_.get_optional<std::string>(key)) return *v;
    return std::nullopt;
  }

  void get(const std::string& key, double& out) {
    if (auto v = raw(key)) out = parse_double(*v, where(key));
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (auto v = raw(key)) out = parse_double(*v, where(key));
  }
  void get(const std::string& key, int& out) {
    if (auto v = raw(key)) out = static_cast<int>(parse_int(*v, where(key)));
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (auto v = raw(key)) {
      const long long x = parse_int(*v, where(key));
      require(x >= 0, ErrorCode::ConfigError, where(key) + ": must be non-negative");
      out = static_cast<std::uint64_t>(x);
    }
  }
  void get(const std::string& key, bool& out) {
    if (auto v = raw(key)) out = parse_bool(*v, where(key));
  }
  void get(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = trim(*v);
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (auto v = raw(key)) out = parse_list(*v, where(key));
  }

  void finish() const {
    for (const auto& [key, value] : tree_) {
      require(known_.count(key) > 0, ErrorCode::ConfigError, "unknown key '" + key + "' in section [" + name_ + "]");
    }
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  std::string name_;
  boost::property_tree::ptree tree_;
  std::set<std::string> known_;
};

}  // namespace detail

inline Lambda0Selector parse_lambda0_selector(const std::string& text) {
  std::stringstream ss(text);
  std::string kind, arg, extra;
  ss >> kind >> arg;
  require(!kind.empty() && !arg.empty() && !(ss >> extra), ErrorCode::ConfigError,
          "[spectral] lambda0: expected 'index k' or 'value v', got '" + text + "'");
  Lambda0Selector sel;
  if (kind == "index") {
    sel.by_index = true;
    const long long k = detail::parse_int(arg, "[spectral] lambda0");
    require(k >= 0, ErrorCode::ConfigError, "[spectral] lambda0: index must be non-negative");
    sel.index = static_cast<int>(k);
  } else if (kind == "value") {
    sel.value = detail::parse_double(arg, "[spectral] lambda0");
  } else {
    throw Error(ErrorCode::ConfigError, "[spectral] lambda0: unknown selector '" + kind + "'");
  }
  return sel;
}

inline void validate(const ExperimentConfig& c) {
  auto pos = [](double v, const char* what) {
    require(v > 0.0 && std::isfinite(v), ErrorCode::ConfigError, std::string(what) + " must be positive");
  };
  require(c.grid.dim == 1 || c.grid.dim == 2, ErrorCode::ConfigError, "[grid] N must be 1 or 2");
  pos(c.grid.L, "[grid] L");
  require(c.grid.n >= 3, ErrorCode::ConfigError, "[grid] n must be at least 3");
  const std::set<std::string> pots{"poschl_teller", "square_well", "coulomb", "constant"};
  require(pots.count(c.potential.family) > 0, ErrorCode::ConfigError,
          "[potential] family: unknown '" + c.potential.family + "'");
  const std::set<std::string> nls{"zero", "arctan", "rational", "constant"};
  require(nls.count(c.nonlinearity.family) > 0, ErrorCode::ConfigError,
          "[nonlinearity] family: unknown '" + c.nonlinearity.family + "'");
  pos(c.nonlinearity.width, "[nonlinearity] width");
  pos(c.spectral.tol_eig, "[spectral] tol_eig");
  pos(c.spectral.cluster_tol, "[spectral] cluster_tol");
  require(c.spectral.delta >= 0.0, ErrorCode::ConfigError, "[spectral] delta must be non-negative");
  parse_lambda0_selector(c.spectral.lambda0);
  const auto& e = c.experiment;
  require(e.side == "below" || e.side == "above" || e.side == "both", ErrorCode::ConfigError,
          "[experiment] side must be below, above or both");
  require(e.points >= 1, ErrorCode::ConfigError, "[experiment] points must be positive");
  require(e.window >= 2, ErrorCode::ConfigError, "[experiment] window must be at least 2");
  require(e.tail >= 2, ErrorCode::ConfigError, "[experiment] tail must be at least 2");
  require(e.growth_factor > 1.0, ErrorCode::ConfigError, "[experiment] growth_factor must exceed 1");
  pos(e.sandwich_bound, "[experiment] sandwich_bound");
  pos(e.slope_tol, "[experiment] slope_tol");
  pos(e.tol_fp, "[experiment] tol_fp");
  pos(e.tol_pde, "[experiment] tol_pde");
  pos(e.tol_lin, "[experiment] tol_lin");
  require(e.max_iterations > 0, ErrorCode::ConfigError, "[experiment] max_iterations must be positive");
  if (e.u_cap) pos(*e.u_cap, "[experiment] u_cap");
  require(e.net_size > 0 && e.sample_budget >= 0 && e.probe_samples > 0, ErrorCode::ConfigError,
          "[experiment] net_size and probe_samples must be positive");
  for (double r : e.probe_radii) pos(r, "[experiment] probe_radii");
  pos(e.horizon, "[experiment] horizon");
  if (e.dt) pos(*e.dt, "[experiment] dt");
  pos(e.save_every, "[experiment] save_every");
  require(e.stop == "time" || e.stop == "equilibrium" || e.stop == "plateau", ErrorCode::ConfigError,
          "[experiment] stop must be time, equilibrium or plateau");
  pos(e.tol_eq, "[experiment] tol_eq");
  pos(e.init_width, "[experiment] init_width");
  for (double r : e.tail_radii) pos(r, "[experiment] tail_radii");
  require(e.workers >= 0, ErrorCode::ConfigError, "[experiment] workers must be non-negative");
  require(!c.output.dir.empty(), ErrorCode::ConfigError, "[output] dir must not be empty");
}

inline ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree root;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  const std::set<std::string> sections{"grid", "potential", "nonlinearity", "spectral", "experiment", "output"};
  for (const auto& [name, child] : root) {
    require(!child.empty() || child.data().empty(), ErrorCode::ConfigError, "key '" + name + "' outside a section");
    require(sections.count(name) > 0, ErrorCode::ConfigError, "unknown section [" + name + "]");
  }

  ExperimentConfig c;
  {
    detail::SectionReader s(root, "grid");
    s.get("N", c.grid.dim);
    s.get("L", c.grid.L);
    s.get("n", c.grid.n);
    s.finish();
  }
  {
    detail::SectionReader s(root, "potential");
    auto& p = c.potential;
    s.get("family", p.family);
    s.get("ell", p.ell);
    s.get("depth", p.depth);
    s.get("width", p.width);
    s.get("c", p.c);
    s.get("alpha", p.alpha);
    s.get("center_x", p.center_x);
    s.get("center_y", p.center_y);
    s.get("split_radius", p.split_radius);
    s.get("offset", p.offset);
    s.get("p", p.p);
    s.finish();
  }
  {
    detail::SectionReader s(root, "nonlinearity");
    auto& f = c.nonlinearity;
    s.get("family", f.family);
    s.get("amplitude", f.amplitude);
    s.get("width", f.width);
    s.get("flip_half_line", f.flip_half_line);
    s.finish();
  }
  {
    detail::SectionReader s(root, "spectral");
    auto& sp = c.spectral;
    s.get("ceiling", sp.ceiling);
    s.get("tol_eig", sp.tol_eig);
    s.get("cluster_tol", sp.cluster_tol);
    s.get("lambda0", sp.lambda0);
    s.get("delta", sp.delta);
    s.get("morse_at", sp.morse_at);
    s.finish();
  }
  {
    detail::SectionReader s(root, "experiment");
    auto& e = c.experiment;
    s.get("seed", e.seed);
    s.get("workers", e.workers);
    s.get("side", e.side);
    s.get("points", e.points);
    s.get("growth_factor", e.growth_factor);
    s.get("window", e.window);
    s.get("tail", e.tail);
    s.get("sandwich_bound", e.sandwich_bound);
    s.get("slope_tol", e.slope_tol);
    s.get("tol_fp", e.tol_fp);
    s.get("tol_pde", e.tol_pde);
    s.get("tol_lin", e.tol_lin);
    s.get("max_iterations", e.max_iterations);
    s.get("u_cap", e.u_cap);
    s.get("net_size", e.net_size);
    s.get("sample_budget", e.sample_budget);
    s.get("probe_samples", e.probe_samples);
    s.get("probe_radii", e.probe_radii);
    s.get("lambda", e.lambda);
    s.get("horizon", e.horizon);
    s.get("dt", e.dt);
    s.get("save_every", e.save_every);
    s.get("stop", e.stop);
    s.get("tol_eq", e.tol_eq);
    s.get("init_amplitude", e.init_amplitude);
    s.get("init_center", e.init_center);
    s.get("init_width", e.init_width);
    s.get("snapshots", e.snapshots);
    s.get("tail_radii", e.tail_radii);
    s.finish();
  }
  {
    detail::SectionReader s(root, "output");
    s.get("dir", c.output.dir);
    s.finish();
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  try {
    return parse_config(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

/// Effective config with defaults filled, section by section in a fixed order.
/// Unset optionals are written as "auto".
inline std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> effective_entries(
    const ExperimentConfig& c) {
  auto num = [](double v) { return format_shortest(v); };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("auto"); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const auto& p = c.potential;
  const auto& f = c.nonlinearity;
  const auto& sp = c.spectral;
  const auto& e = c.experiment;
  return {
      {"grid", {{"N", std::to_string(c.grid.dim)}, {"L", num(c.grid.L)}, {"n", std::to_string(c.grid.n)}}},
      {"potential",
       {{"family", p.family},
        {"ell", num(p.ell)},
        {"depth", num(p.depth)},
        {"width", num(p.width)},
        {"c", num(p.c)},
        {"alpha", num(p.alpha)},
        {"center_x", num(p.center_x)},
        {"center_y", num(p.center_y)},
        {"split_radius", num(p.split_radius)},
        {"offset", num(p.offset)},
        {"p", num(p.p)}}},
      {"nonlinearity",
       {{"family", f.family},
        {"amplitude", num(f.amplitude)},
        {"width", num(f.width)},
        {"flip_half_line", b(f.flip_half_line)}}},
      {"spectral",
       {{"ceiling", opt(sp.ceiling)},
        {"tol_eig", num(sp.tol_eig)},
        {"cluster_tol", num(sp.cluster_tol)},
        {"lambda0", sp.lambda0},
        {"delta", num(sp.delta)},
        {"morse_at", detail::join_list(sp.morse_at)}}},
      {"experiment",
       {{"seed", std::to_string(e.seed)},
        {"workers", std::to_string(e.workers)},
        {"side", e.side},
        {"points", std::to_string(e.points)},
        {"growth_factor", num(e.growth_factor)},
        {"window", std::to_string(e.window)},
        {"tail", std::to_string(e.tail)},
        {"sandwich_bound", num(e.sandwich_bound)},
        {"slope_tol", num(e.slope_tol)},
        {"tol_fp", num(e.tol_fp)},
        {"tol_pde", num(e.tol_pde)},
        {"tol_lin", num(e.tol_lin)},
        {"max_iterations", std::to_string(e.max_iterations)},
        {"u_cap", opt(e.u_cap)},
        {"net_size", std::to_string(e.net_size)},
        {"sample_budget", std::to_string(e.sample_budget)},
        {"probe_samples", std::to_string(e.probe_samples)},
        {"probe_radii", detail::join_list(e.probe_radii)},
        {"lambda", opt(e.lambda)},
        {"horizon", num(e.horizon)},
        {"dt", opt(e.dt)},
        {"save_every", num(e.save_every)},
        {"stop", e.stop},
        {"tol_eq", num(e.tol_eq)},
        {"init_amplitude", num(e.init_amplitude)},
        {"init_center", num(e.init_center)},
        {"init_width", num(e.init_width)},
        {"snapshots", b(e.snapshots)},
        {"tail_radii", detail::join_list(e.tail_radii)}}},
      {"output", {{"dir", c.output.dir}}},
  };
}

/// INI text of the effective config; parses back to an equal config.
inline std::string to_ini(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [section, entries] : effective_entries(c)) {
    if (!out.empty()) out += '\n';
    out += "[" + section + "]\n";
    for (const auto& [key, value] : entries) {
      if (value == "auto" || value.empty()) continue;
      out += key + " = " + value + "\n";
    }
  }
  return out;
}

}  // namespace reslab
