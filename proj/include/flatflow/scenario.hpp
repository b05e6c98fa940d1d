#pragma once

// Scenario configuration, initial shapes, and the batch driver that writes a
// run directory.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "flatflow/diagnostics.hpp"
#include "flatflow/excess.hpp"
#include "flatflow/harnack.hpp"
#include "flatflow/io.hpp"
#include "flatflow/mms.hpp"

namespace flatflow {

inline constexpr const char* kVersion = "flatflow 0.1.0";

struct ShapeConfig {
  std::string kind = "disk";  // disk | ellipse | dumbbell | star | fourier | superellipse
  double area = std::numbers::pi;
  double center_x = 0.0;
  double center_y = 0.0;
  double angle = 0.0;
  double aspect = 2.0;           // ellipse axis ratio
  double lobe_radius = 0.6;      // dumbbell
  double neck_half_width = 0.15;
  double separation = 1.8;       // distance of the lobe centres
  int lobes = 5;                 // star
  double amplitude = 0.3;        // star, fourier
  int modes = 6;                 // fourier, modes 2..modes
  double exponent = 4.0;         // superellipse |x|^p + |y|^p = 1

  bool operator==(const ShapeConfig&) const = default;
};

struct ScenarioConfig {
  // [grid]
  int nx = 256;
  int ny = 256;
  double spacing = 4.0 / 256;
  double origin_x = -2.0 + 2.0 / 256;
  double origin_y = -2.0 + 2.0 / 256;
  // [shape]
  ShapeConfig shape;
  // [flow]
  double h = 0.0;  // 0 selects the smallest admissible step 4 spacing^2
  int steps = 100;
  std::string mode = "constrained";
  double rof_tol = 1e-6;
  int rof_max_iter = 20000;
  int snapshot_stride = 10;
  bool warm_start = true;
  // [diagnostics]
  bool apriori = true;
  double apriori_window = 1.0;
  bool good_times = true;
  double eps0 = 0.05;
  double delta0 = 0.1;
  double T = 0.0;
  std::vector<std::array<double, 2>> excess_points;
  double excess_t0 = -1.0;  // negative selects the final step
  double excess_r = 0.0;    // 0 selects 8 spacings
  double excess_sigma = 0.5;
  double excess_alpha = 0.1;
  int excess_depth = 2;
  bool harnack = false;
  double harnack_a = 2.0;
  int harnack_samples = 4096;
  int harnack_trials = 50;
  int harnack_base = 64;
  int harnack_slices = 64;
  // [output]
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  Grid grid() const { return Grid(nx, ny, spacing, {origin_x, origin_y}); }
  double time_step() const { return h > 0.0 ? h : 4.0 * spacing * spacing; }
  double probe_radius() const { return excess_r > 0.0 ? excess_r : 8.0 * spacing; }
  FlowMode flow_mode() const { return mode == "unconstrained" ? FlowMode::Unconstrained : FlowMode::Constrained; }

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

inline double parse_real(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  config_error(key + ": expected a finite number, got '" + s + "'");
}

inline long long parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  config_error(key + ": expected an integer, got '" + s + "'");
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  config_error(key + ": expected true or false, got '" + s + "'");
}

inline std::vector<std::array<double, 2>> parse_points(const std::string& key, const std::string& s) {
  std::vector<std::array<double, 2>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) config_error(key + ": points are written x,y;x,y");
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(' '));
      t.erase(t.find_last_not_of(' ') + 1);
      return t;
    };
    out.push_back({parse_real(key, trim(item.substr(0, comma))), parse_real(key, trim(item.substr(comma + 1)))});
  }
  return out;
}

inline std::string show_points(const std::vector<std::array<double, 2>>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ';';
    s += fmt(pts[i][0]) + ',' + fmt(pts[i][1]);
  }
  return s;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <class T>
Field real_field(const char* sec, const char* key, T ScenarioConfig::*m) {
  return {sec, key, [=](ScenarioConfig& c, const std::string& s) { c.*m = parse_real(key, s); },
          [=](const ScenarioConfig& c) { return fmt(c.*m); }};
}

template <class T>
Field int_field(const char* sec, const char* key, T ScenarioConfig::*m) {
  return {sec, key, [=](ScenarioConfig& c, const std::string& s) { c.*m = static_cast<T>(parse_int(key, s)); },
          [=](const ScenarioConfig& c) { return std::to_string(c.*m); }};
}

inline Field bool_field(const char* sec, const char* key, bool ScenarioConfig::*m) {
  return {sec, key, [=](ScenarioConfig& c, const std::string& s) { c.*m = parse_bool(key, s); },
          [=](const ScenarioConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

inline Field text_field(const char* sec, const char* key, std::string ScenarioConfig::*m) {
  return {sec, key, [=](ScenarioConfig& c, const std::string& s) { c.*m = s; },
          [=](const ScenarioConfig& c) { return c.*m; }};
}

template <class T>
Field shape_real(const char* key, T ShapeConfig::*m) {
  return {"shape", key, [=](ScenarioConfig& c, const std::string& s) { c.shape.*m = parse_real(key, s); },
          [=](const ScenarioConfig& c) { return fmt(c.shape.*m); }};
}

inline Field shape_int(const char* key, int ShapeConfig::*m) {
  return {"shape", key, [=](ScenarioConfig& c, const std::string& s) { c.shape.*m = static_cast<int>(parse_int(key, s)); },
          [=](const ScenarioConfig& c) { return std::to_string(c.shape.*m); }};
}

// Serialization order follows this table.
inline const std::vector<Field>& config_fields() {
  static const std::vector<Field> fields = {
      int_field("grid", "nx", &ScenarioConfig::nx),
      int_field("grid", "ny", &ScenarioConfig::ny),
      real_field("grid", "spacing", &ScenarioConfig::spacing),
      real_field("grid", "origin_x", &ScenarioConfig::origin_x),
      real_field("grid", "origin_y", &ScenarioConfig::origin_y),
      {"shape", "kind", [](ScenarioConfig& c, const std::string& s) { c.shape.kind = s; },
       [](const ScenarioConfig& c) { return c.shape.kind; }},
      shape_real("area", &ShapeConfig::area),
      shape_real("center_x", &ShapeConfig::center_x),
      shape_real("center_y", &ShapeConfig::center_y),
      shape_real("angle", &ShapeConfig::angle),
      shape_real("aspect", &ShapeConfig::aspect),
      shape_real("lobe_radius", &ShapeConfig::lobe_radius),
      shape_real("neck_half_width", &ShapeConfig::neck_half_width),
      shape_real("separation", &ShapeConfig::separation),
      shape_int("lobes", &ShapeConfig::lobes),
      shape_real("amplitude", &ShapeConfig::amplitude),
      shape_int("modes", &ShapeConfig::modes),
      shape_real("exponent", &ShapeConfig::exponent),
      real_field("flow", "h", &ScenarioConfig::h),
      int_field("flow", "steps", &ScenarioConfig::steps),
      text_field("flow", "mode", &ScenarioConfig::mode),
      real_field("flow", "rof_tol", &ScenarioConfig::rof_tol),
      int_field("flow", "rof_max_iter", &ScenarioConfig::rof_max_iter),
      int_field("flow", "snapshot_stride", &ScenarioConfig::snapshot_stride),
      bool_field("flow", "warm_start", &ScenarioConfig::warm_start),
      bool_field("diagnostics", "apriori", &ScenarioConfig::apriori),
      real_field("diagnostics", "apriori_window", &ScenarioConfig::apriori_window),
      bool_field("diagnostics", "good_times", &ScenarioConfig::good_times),
      real_field("diagnostics", "eps0", &ScenarioConfig::eps0),
      real_field("diagnostics", "delta0", &ScenarioConfig::delta0),
      real_field("diagnostics", "T", &ScenarioConfig::T),
      {"diagnostics", "excess_points",
       [](ScenarioConfig& c, const std::string& s) { c.excess_points = parse_points("excess_points", s); },
       [](const ScenarioConfig& c) { return show_points(c.excess_points); }},
      real_field("diagnostics", "excess_t0", &ScenarioConfig::excess_t0),
      real_field("diagnostics", "excess_r", &ScenarioConfig::excess_r),
      real_field("diagnostics", "excess_sigma", &ScenarioConfig::excess_sigma),
      real_field("diagnostics", "excess_alpha", &ScenarioConfig::excess_alpha),
      int_field("diagnostics", "excess_depth", &ScenarioConfig::excess_depth),
      bool_field("diagnostics", "harnack", &ScenarioConfig::harnack),
      real_field("diagnostics", "harnack_a", &ScenarioConfig::harnack_a),
      int_field("diagnostics", "harnack_samples", &ScenarioConfig::harnack_samples),
      int_field("diagnostics", "harnack_trials", &ScenarioConfig::harnack_trials),
      int_field("diagnostics", "harnack_base", &ScenarioConfig::harnack_base),
      int_field("diagnostics", "harnack_slices", &ScenarioConfig::harnack_slices),
      text_field("output", "dir", &ScenarioConfig::output_dir),
      {"output", "seed",
       [](ScenarioConfig& c, const std::string& s) {
         const long long v = parse_int("seed", s);
         if (v < 0) config_error("seed: must be nonnegative");
         c.seed = static_cast<std::uint64_t>(v);
       },
       [](const ScenarioConfig& c) { return std::to_string(c.seed); }},
  };
  return fields;
}

}  // namespace detail

/// Rejects inconsistent settings. Time steps below the resolution contract
/// raise ResolutionViolation, everything else ConfigError.
inline void validate(const ScenarioConfig& c) {
  using detail::config_error;
  if (c.nx < 8 || c.ny < 8) config_error("grid: nx and ny must be at least 8");
  if (!(c.spacing > 0.0)) config_error("grid: spacing must be positive");
  static const std::array<const char*, 6> kinds = {"disk", "ellipse", "dumbbell", "star", "fourier", "superellipse"};
  if (std::find(kinds.begin(), kinds.end(), c.shape.kind) == kinds.end()) config_error("shape: unknown kind '" + c.shape.kind + "'");
  if (!(c.shape.area > 0.0)) config_error("shape: area must be positive");
  if (!(c.shape.aspect >= 1.0)) config_error("shape: aspect must be at least 1");
  if (!(c.shape.lobe_radius > 0.0 && c.shape.neck_half_width > 0.0 && c.shape.neck_half_width < c.shape.lobe_radius))
    config_error("shape: dumbbell needs 0 < neck_half_width < lobe_radius");
  if (!(c.shape.separation > 0.0)) config_error("shape: separation must be positive");
  if (c.shape.lobes < 1) config_error("shape: lobes must be positive");
  if (!(c.shape.amplitude >= 0.0 && c.shape.amplitude < 1.0)) config_error("shape: amplitude must lie in [0, 1)");
  if (c.shape.modes < 2) config_error("shape: modes must be at least 2");
  if (!(c.shape.exponent >= 1.0)) config_error("shape: exponent must be at least 1");
  if (c.h < 0.0) config_error("flow: h must be nonnegative");
  if (c.steps < 0) config_error("flow: steps must be nonnegative");
  if (c.mode != "constrained" && c.mode != "unconstrained") config_error("flow: mode is constrained or unconstrained");
  if (!(c.rof_tol > 0.0) || c.rof_max_iter < 1) config_error("flow: rof_tol and rof_max_iter must be positive");
  if (c.snapshot_stride < 0) config_error("flow: snapshot_stride must be nonnegative");
  if (!(c.apriori_window > 0.0)) config_error("diagnostics: apriori_window must be positive");
  if (!(c.eps0 > 0.0) || c.delta0 < 0.0 || c.T < 0.0) config_error("diagnostics: eps0 > 0, delta0 >= 0, T >= 0");
  if (!(c.excess_sigma > 0.0 && c.excess_sigma < 1.0)) config_error("diagnostics: excess_sigma must lie in (0, 1)");
  if (!(c.excess_alpha > 0.0 && c.excess_alpha < 1.0)) config_error("diagnostics: excess_alpha must lie in (0, 1)");
  if (c.excess_r < 0.0 || c.excess_depth < 0) config_error("diagnostics: excess_r and excess_depth must be nonnegative");
  if (!(c.harnack_a > 0.0) || c.harnack_samples < 1 || c.harnack_trials < 1 || c.harnack_base < 2 || c.harnack_slices < 1)
    config_error("diagnostics: harnack parameters must be positive");
  if (c.output_dir.empty()) config_error("output: dir must not be empty");
  check_resolution(c.grid(), c.time_step());
}

inline ScenarioConfig parse_config(std::istream& is) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    detail::config_error(e.what());
  }
  ScenarioConfig c;
  const auto& fields = detail::config_fields();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) detail::config_error("key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      auto it = std::find_if(fields.begin(), fields.end(),
                             [&](const detail::Field& f) { return section == f.section && key == f.key; });
      if (it == fields.end()) detail::config_error("unknown key [" + section + "] " + key);
      it->set(c, value.data());
    }
  }
  validate(c);
  return c;
}

inline ScenarioConfig parse_config(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) detail::config_error("cannot read config " + p.string());
  return parse_config(is);
}

inline std::string serialize_config(const ScenarioConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : detail::config_fields()) {
    if (section != f.section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(c) + '\n';
  }
  return out;
}

/// Unit-scale level function of the configured shape; negative inside.
inline std::function<double(Vec2)> shape_function(const ShapeConfig& s, std::uint64_t seed) {
  if (s.kind == "disk") return [](Vec2 q) { return norm(q) - 1.0; };
  if (s.kind == "ellipse") {
    const double a = std::sqrt(s.aspect), b = 1.0 / std::sqrt(s.aspect);
    return [=](Vec2 q) { return b * (std::hypot(q.x / a, q.y / b) - 1.0); };
  }
  if (s.kind == "dumbbell") {
    const double r = s.lobe_radius, w = s.neck_half_width, d = 0.5 * s.separation;
    return [=](Vec2 q) {
      const double lobes = std::min(norm(q - Vec2{d, 0.0}), norm(q + Vec2{d, 0.0})) - r;
      const double ex = std::abs(q.x) - d, ey = std::abs(q.y) - w;
      const double neck = std::hypot(std::max(ex, 0.0), std::max(ey, 0.0)) + std::min(std::max(ex, ey), 0.0);
      return std::min(lobes, neck);
    };
  }
  if (s.kind == "star") {
    const double amp = s.amplitude;
    const int m = s.lobes;
    return [=](Vec2 q) { return norm(q) - (1.0 + amp * std::cos(m * std::atan2(q.y, q.x))); };
  }
  if (s.kind == "fourier") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::pair<double, double>> coef;
    double total = 0.0;
    for (int m = 2; m <= s.modes; ++m) {
      const double a = u(rng) / m, b = u(rng) / m;
      coef.emplace_back(a, b);
      total += std::abs(a) + std::abs(b);
    }
    // The perturbation never exceeds the amplitude.
    const double scale = total > 0.0 ? s.amplitude / total : 0.0;
    return [=](Vec2 q) {
      const double th = std::atan2(q.y, q.x);
      double r = 1.0;
      for (std::size_t i = 0; i < coef.size(); ++i) {
        const double m = static_cast<double>(i + 2);
        r += scale * (coef[i].first * std::cos(m * th) + coef[i].second * std::sin(m * th));
      }
      return norm(q) - r;
    };
  }
  if (s.kind == "superellipse") {
    const double p = s.exponent;
    return [=](Vec2 q) {
      const double x = std::abs(q.x), y = std::abs(q.y), m = std::max(x, y);
      if (m == 0.0) return -1.0;
      return m * std::pow(std::pow(x / m, p) + std::pow(y / m, p), 1.0 / p) - 1.0;
    };
  }
  detail::config_error("shape: unknown kind '" + s.kind + "'");
}

/// The configured shape dilated about its centre so that its area is the
/// requested one within 1e-9 relative.
inline Region generate_initial(const ScenarioConfig& c) {
  const Grid g = c.grid();
  const auto f = shape_function(c.shape, c.seed);
  const Vec2 centre{c.shape.center_x, c.shape.center_y};
  const double ca = std::cos(c.shape.angle), sa = std::sin(c.shape.angle);
  auto field = [&](double scale) {
    return GridField::sample(g, [&](Vec2 p) {
      const Vec2 d = p - centre;
      const Vec2 q{(ca * d.x + sa * d.y) / scale, (-sa * d.x + ca * d.y) / scale};
      return scale * f(q);
    });
  };
  const Vec2 lo = g.lattice_min(), hi = g.lattice_max();
  const double diag = norm(hi - lo);
  const double v = c.shape.area;
  double s_lo = 0.0, s_hi = 0.25;
  while (sublevel_area(field(s_hi), 0.0) < v) {
    s_hi *= 2.0;
    if (s_hi > 4.0 * diag) throw Error(ErrorKind::ShapeOutOfDomain, "requested area does not fit in the domain");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (s_lo + s_hi);
    const double a = sublevel_area(field(mid), 0.0);
    if (std::abs(a - v) <= 1e-9 * v) {
      s_lo = s_hi = mid;
      break;
    }
    (a < v ? s_lo : s_hi) = mid;
  }
  const double scale = 0.5 * (s_lo + s_hi);
  Region r;
  try {
    r = Region(field(scale));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BoundaryClipped) throw;
    throw Error(ErrorKind::ShapeOutOfDomain, "shape leaves the domain");
  }
  if (r.empty() || r.contours().empty()) throw Error(ErrorKind::ShapeOutOfDomain, "shape vanished on the grid");
  const double margin = 8.0 * g.spacing;
  for (const Contour& loop : r.contours())
    for (const Vec2& x : loop.vertices())
      if (x.x < lo.x + margin || x.x > hi.x - margin || x.y < lo.y + margin || x.y > hi.y - margin)
        throw Error(ErrorKind::ShapeOutOfDomain, "shape comes closer than 8 cells to the domain edge");
  if (std::abs(r.area() - v) > 1e-6 * v) throw Error(ErrorKind::ShapeOutOfDomain, "could not normalise the area");
  return r;
}

/// Exit status of a failure: 2 for configuration problems, 3 for numerical ones.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::ResolutionViolation:
    case ErrorKind::ShapeOutOfDomain:
      return 2;
    default:
      return 3;
  }
}

/// Rebuilds a trace from a run directory (records and boundaries, no snapshots).
inline FlowTrace load_trace(const std::filesystem::path& dir) {
  const ScenarioConfig c = parse_config(dir / "config.ini");
  FlowTrace tr;
  tr.h = c.time_step();
  tr.mode = c.flow_mode();
  tr.grid = c.grid();
  tr.records = read_records(dir / "trace.csv", dir / "motion.csv");
  tr.boundaries = read_boundaries(dir / "boundaries.bin");
  if (tr.records.empty()) throw Error(ErrorKind::IoError, "trace.csv has no rows");
  if (tr.boundaries.size() != tr.records.size()) throw Error(ErrorKind::IoError, "boundaries.bin does not match trace.csv");
  tr.v = tr.mode == FlowMode::Constrained ? c.shape.area : tr.records.front().area;
  return tr;
}

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  auto os = open_out(p);
  os << s;
}

inline double resolve_t0(const ScenarioConfig& c, const FlowTrace& tr) {
  return c.excess_t0 >= 0.0 ? c.excess_t0 : tr.records.back().t;
}

// Least-squares slope of log osc against log rho, sign flipped.
inline double fitted_exponent(const std::vector<double>& rho, const std::vector<double>& osc) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double x = std::log(rho[i]), y = std::log(osc[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

/// Dyadic radii at which oscillation is reported.
inline constexpr std::array<double, 3> kOscillationRadii = {0.5, 0.25, 0.125};

struct OscillationTrend {
  std::vector<double> rho;
  std::vector<double> osc;
  double gamma = 0.0;
  bool monotone = false;  // non-increasing as rho shrinks
};

inline OscillationTrend oscillation_trend(const RescaledPair& v) {
  OscillationTrend o;
  for (double rho : kOscillationRadii) {
    o.rho.push_back(rho);
    o.osc.push_back(oscillation(v, 0.0, 0.0, rho));
  }
  o.monotone = true;
  for (std::size_t i = 1; i < o.osc.size(); ++i) o.monotone = o.monotone && o.osc[i] <= o.osc[i - 1];
  const bool positive = std::all_of(o.osc.begin(), o.osc.end(), [](double x) { return x > 0.0; });
  o.gamma = positive ? detail::fitted_exponent(o.rho, o.osc) : std::numeric_limits<double>::quiet_NaN();
  return o;
}

/// Number of base samples of the rescaled functions on [-1, 1].
inline constexpr std::size_t kRescaledBase = 65;

/// Writes apriori.csv, good_times.csv and summary.csv into `dir`.
inline void write_trace_diagnostics(const std::filesystem::path& dir, const ScenarioConfig& c, const FlowTrace& tr) {
  std::vector<std::pair<std::string, std::string>> summary;
  if (c.apriori) {
    const AprioriReport rep = apriori_report(tr, c.apriori_window);
    auto os = detail::open_out(dir / "apriori.csv");
    os << "t1,t2,dissipation,perimeter_drop,dissipation_ratio,lambda_energy\n";
    for (const AprioriWindow& w : rep.windows)
      os << fmt(w.t1) << ',' << fmt(w.t2) << ',' << fmt(w.dissipation) << ',' << fmt(w.perimeter_drop) << ','
         << fmt(w.dissipation_ratio) << ',' << fmt(w.lambda_energy) << '\n';
    summary.emplace_back("max_distance_ratio", fmt(rep.max_distance_ratio));
    summary.emplace_back("dissipation", fmt(rep.dissipation));
    summary.emplace_back("perimeter_drop", fmt(rep.perimeter_drop));
    summary.emplace_back("dissipation_ratio", fmt(rep.dissipation_ratio));
    summary.emplace_back("kappa_p99_sqrt_h", fmt(rep.kappa_p99_scaled));
    summary.emplace_back("single_step", rep.single_step ? "true" : "false");
  }
  if (c.good_times) {
    const double t_end = trace_end(tr);
    GoodTimes gt;
    if (c.T <= t_end) gt = good_times(tr, c.T, c.eps0);
    auto os = detail::open_out(dir / "good_times.csv");
    os << "set,start,end\n";
    for (const auto& [a, b] : gt.gamma.intervals()) os << "gamma," << fmt(a) << ',' << fmt(b) << '\n';
    for (const auto& [a, b] : gt.sigma.intervals()) os << "sigma," << fmt(a) << ',' << fmt(b) << '\n';
    summary.emplace_back("gamma_measure", fmt(gt.gamma.measure()));
    summary.emplace_back("sigma_measure", fmt(gt.sigma.measure()));
    const double t0 = detail::resolve_t0(c, tr);
    if (t0 - 1.0 >= tr.records.front().t) {
      const PlanarCondition pc = planar_condition(tr, t0, c.eps0, c.delta0);
      summary.emplace_back("planar_t0", fmt(t0));
      summary.emplace_back("planar_perimeter", fmt(pc.perimeter));
      summary.emplace_back("planar_perimeter_bound", fmt(pc.perimeter_bound));
      summary.emplace_back("planar_density", fmt(pc.density));
      summary.emplace_back("planar_holds", pc.holds() ? "true" : "false");
    }
  }
  auto os = detail::open_out(dir / "summary.csv");
  os << "quantity,value\n";
  for (const auto& [k, v] : summary) os << k << ',' << v << '\n';
}

inline void write_decay_csv(std::ostream& os, std::size_t point, const std::vector<DecayLevel>& levels) {
  for (const DecayLevel& l : levels)
    os << point << ',' << fmt(l.r) << ',' << fmt(l.excess) << ',' << fmt(l.excess_ratio) << ',' << fmt(l.dA) << ','
       << fmt(l.domega) << ',' << fmt(l.dc) << ',' << fmt(l.frame.a) << ',' << fmt(l.frame.omega.x) << ','
       << fmt(l.frame.omega.y) << ',' << fmt(l.frame.c) << ',' << fmt(l.frame.x0.x) << ',' << fmt(l.frame.x0.y) << '\n';
}

inline constexpr const char* kDecayColumns = "point,scale,excess,excess_ratio,dA,domega,dc,a,omega_x,omega_y,c,x0_x,x0_y";
inline constexpr const char* kContactColumns = "trial,xi,tau,a,y,t_k,shift,tie_flag";

inline void write_contacts(std::ostream& os, std::size_t trial, const ContactSet<1>& set) {
  for (const ContactRecord<1>& r : set.records())
    os << trial << ',' << fmt(r.xi[0]) << ',' << fmt(r.tau) << ',' << fmt(r.a) << ',' << fmt(set.base().point(r.index)[0])
       << ',' << fmt(set.dt() * r.k) << ',' << fmt(r.shift) << ',' << (r.tie ? 1 : 0) << '\n';
}

/// Excess decay, oscillation and (optionally) contact sets at each probe point.
inline void write_probe_outputs(const std::filesystem::path& dir, const ScenarioConfig& c, const FlowTrace& tr) {
  if (c.excess_points.empty()) return;
  const double t0 = detail::resolve_t0(c, tr);
  const double r = c.probe_radius();
  auto ex = detail::open_out(dir / "excess_probe.csv");
  ex << kDecayColumns << '\n';
  auto osc = detail::open_out(dir / "oscillation.csv");
  osc << "point,rho,osc,gamma,monotone\n";
  std::ofstream har, har_sum;
  if (c.harnack) {
    har = detail::open_out(dir / "harnack.csv");
    har << kContactColumns << '\n';
    har_sum = detail::open_out(dir / "harnack_summary.csv");
    har_sum << "trial,ratio,g_measure,contact_measure,centers,touching_centers,in_regime\n";
  }
  for (std::size_t i = 0; i < c.excess_points.size(); ++i) {
    const Vec2 x{c.excess_points[i][0], c.excess_points[i][1]};
    const auto levels = decay_probe(tr, x, t0, r, c.excess_sigma, c.excess_alpha, c.excess_depth);
    write_decay_csv(ex, i, levels);
    const LambdaSeries lam = lambda_accumulate(tr, t0);
    const ExcessWindow win = make_window(tr, lam.k0, r);
    const RescaledPair v = rescale_v(win, levels.front().frame, r, kCylinderHeight * r, lam, c.excess_alpha, kRescaledBase);
    const OscillationTrend trend = oscillation_trend(v);
    for (std::size_t j = 0; j < trend.rho.size(); ++j)
      osc << i << ',' << fmt(trend.rho[j]) << ',' << fmt(trend.osc[j]) << ',' << fmt(trend.gamma) << ','
          << (trend.monotone ? "true" : "false") << '\n';
    if (c.harnack) {
      const RescaledPair w = perturb_w(v, lam, r, c.excess_alpha);
      try {
        const auto res = abp_ratio<1>(c.harnack_a, standard_center_box(), w.minus, full_window(w.minus),
                                      static_cast<std::size_t>(c.harnack_samples));
        write_contacts(har, i, res.contacts);
        har_sum << i << ',' << fmt(res.ratio) << ',' << fmt(res.g_measure) << ',' << fmt(res.contact_measure) << ','
                << res.centers << ',' << res.touching_centers << ',' << (res.in_regime ? "true" : "false") << '\n';
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyContactSet) throw;
        har_sum << i << ",nan,nan,0," << c.harnack_samples << ",0,false\n";
      }
    }
  }
}

/// Synthetic supersolution trials of the ABP probe.
inline void run_harnack_probe(const std::filesystem::path& dir, const ScenarioConfig& c) {
  std::filesystem::create_directories(dir);
  auto har = detail::open_out(dir / "harnack.csv");
  har << kContactColumns << '\n';
  auto sum = detail::open_out(dir / "harnack_summary.csv");
  sum << "trial,ratio,g_measure,contact_measure,centers,touching_centers,in_regime\n";
  SyntheticFieldOptions opt;
  opt.n_base = c.harnack_base;
  opt.slices = c.harnack_slices;
  opt.a = c.harnack_a;
  for (int t = 0; t < c.harnack_trials; ++t) {
    const SpaceTimeField<1> w = synthetic_supersolution(c.seed + static_cast<std::uint64_t>(t), opt);
    try {
      const auto res = abp_ratio<1>(c.harnack_a, standard_center_box(), w, full_window(w),
                                    static_cast<std::size_t>(c.harnack_samples));
      write_contacts(har, static_cast<std::size_t>(t), res.contacts);
      sum << t << ',' << fmt(res.ratio) << ',' << fmt(res.g_measure) << ',' << fmt(res.contact_measure) << ','
          << res.centers << ',' << res.touching_centers << ',' << (res.in_regime ? "true" : "false") << '\n';
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyContactSet) throw;
      sum << t << ",nan,nan,0," << c.harnack_samples << ",0,false\n";
    }
  }
}

/// Manifest with the config echo, version, timing, and FNV-1a hashes of
/// every regular file in the run directory.
inline void write_manifest(const std::filesystem::path& dir, const ScenarioConfig& c, double seconds,
                           const std::string& status, const std::string& error = {}) {
  nlohmann::ordered_json m;
  m["status"] = status;
  if (!error.empty()) m["error"] = error;
  m["version"] = kVersion;
  m["wall_clock_seconds"] = seconds;
  m["config"] = serialize_config(c);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
  for (const auto& f : files) hashes[std::filesystem::relative(f, dir).generic_string()] = hex64(fnv1a_file(f));
  m["files"] = hashes;
  detail::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

struct RunSummary {
  FlowTrace trace;
  std::filesystem::path dir;
  double seconds = 0.0;
};

/// Runs the configured flow and writes every output into `dir`. On failure
/// the outputs written so far stay and the manifest is marked FAILED.
inline RunSummary run_scenario(const ScenarioConfig& c, const std::filesystem::path& dir,
                               std::function<void(const FlowRecord&)> on_step = {}) {
  validate(c);
  std::filesystem::create_directories(dir / "snapshots");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  detail::write_text(dir / "config.ini", serialize_config(c));
  RunSummary out{{}, dir, 0.0};
  try {
    const Region e0 = generate_initial(c);
    FlowOptions fo;
    fo.step.rof_tol = c.rof_tol;
    fo.step.rof_max_iter = c.rof_max_iter;
    fo.snapshot_stride = c.snapshot_stride;
    fo.warm_start = c.warm_start;
    fo.on_step = std::move(on_step);
    out.trace = run_flow(e0, c.time_step(), c.steps, c.shape.area, c.flow_mode(), fo);
    const FlowTrace& tr = out.trace;
    write_trace_csv(dir / "trace.csv", tr);
    write_motion_csv(dir / "motion.csv", tr);
    write_boundaries(dir / "boundaries.bin", tr.boundaries);
    const int last = tr.last_step();
    for (const auto& [k, region] : tr.snapshots) {
      if (!(k == last || (c.snapshot_stride > 0 && k % c.snapshot_stride == 0))) continue;
      char name[32];
      std::snprintf(name, sizeof name, "step_%06d", k);
      write_field(dir / "snapshots" / (std::string(name) + ".bin"), region.level_set());
      write_region_pgm(dir / "snapshots" / (std::string(name) + ".pgm"), region);
      write_contours_csv(dir / "snapshots" / (std::string(name) + "_contours.csv"), region.contours(), c.spacing);
    }
    write_trace_diagnostics(dir, c, tr);
    write_probe_outputs(dir, c, tr);
    if (tr.truncated) detail::write_text(dir / "STOPPED", tr.stop_reason + "\n");
  } catch (const Error& e) {
    out.seconds = elapsed();
    write_manifest(dir, c, out.seconds, "FAILED", e.what());
    throw;
  }
  out.seconds = elapsed();
  write_manifest(dir, c, out.seconds, "OK");
  return out;
}

}  // namespace flatflow
