#pragma once

// File formats. Binary files are little-endian; the field header is
// int64 nx, int64 ny, f64 spacing, f64 origin_x, f64 origin_y, followed by
// row-major f64 values (x fastest).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "flatflow/boundary.hpp"
#include "flatflow/mms.hpp"

namespace flatflow {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(ErrorKind::IoError, "truncated binary file");
  return v;
}

inline std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(p, mode);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream is(p, mode);
  if (!is) throw Error(ErrorKind::IoError, "cannot read " + p.string());
  return is;
}

}  // namespace detail

/// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_field(std::ostream& os, const GridField& f) {
  const Grid& g = f.grid();
  detail::put<std::int64_t>(os, g.nx);
  detail::put<std::int64_t>(os, g.ny);
  detail::put<double>(os, g.spacing);
  detail::put<double>(os, g.origin.x);
  detail::put<double>(os, g.origin.y);
  for (double v : f.values()) detail::put<double>(os, v);
}

inline GridField read_field(std::istream& is) {
  const auto nx = detail::get<std::int64_t>(is);
  const auto ny = detail::get<std::int64_t>(is);
  const double spacing = detail::get<double>(is);
  const double ox = detail::get<double>(is);
  const double oy = detail::get<double>(is);
  if (nx < 8 || ny < 8 || nx > (1 << 20) || ny > (1 << 20)) throw Error(ErrorKind::IoError, "bad field header");
  const Grid g(static_cast<int>(nx), static_cast<int>(ny), spacing, {ox, oy});
  std::vector<double> values(g.size());
  for (double& v : values) v = detail::get<double>(is);
  return GridField(g, std::move(values));
}

inline void write_field(const std::filesystem::path& p, const GridField& f) {
  auto os = detail::open_out(p, std::ios::binary);
  write_field(os, f);
}

inline GridField read_field(const std::filesystem::path& p) {
  auto is = detail::open_in(p, std::ios::binary);
  return read_field(is);
}

/// 16-bit binary PGM, values mapped linearly from [lo, hi], top row = largest y.
inline void write_pgm(const std::filesystem::path& p, const GridField& f, double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorKind::InvalidArgument, "empty PGM range");
  auto os = detail::open_out(p, std::ios::binary);
  const Grid& g = f.grid();
  os << "P5\n" << g.nx << ' ' << g.ny << "\n65535\n";
  for (int j = g.ny - 1; j >= 0; --j)
    for (int i = 0; i < g.nx; ++i) {
      const double u = std::clamp((f(i, j) - lo) / (hi - lo), 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(u * 65535.0));
      os.put(static_cast<char>(q >> 8));
      os.put(static_cast<char>(q & 0xff));
    }
}

/// Level set of a region as a PGM: inside dark, outside light, band of four cells.
inline void write_region_pgm(const std::filesystem::path& p, const Region& r) {
  const double band = 4.0 * r.grid().spacing;
  write_pgm(p, r.level_set(), -band, band);
}

/// All steps' boundary loops: int64 steps, then per step int64 loops and per
/// loop int64 n followed by n (x, y) pairs.
inline void write_boundaries(const std::filesystem::path& p, const std::vector<std::vector<Contour>>& steps) {
  auto os = detail::open_out(p, std::ios::binary);
  detail::put<std::int64_t>(os, static_cast<std::int64_t>(steps.size()));
  for (const auto& loops : steps) {
    detail::put<std::int64_t>(os, static_cast<std::int64_t>(loops.size()));
    for (const Contour& c : loops) {
      detail::put<std::int64_t>(os, static_cast<std::int64_t>(c.size()));
      for (const Vec2& v : c.vertices()) {
        detail::put<double>(os, v.x);
        detail::put<double>(os, v.y);
      }
    }
  }
}

inline std::vector<std::vector<Contour>> read_boundaries(const std::filesystem::path& p) {
  auto is = detail::open_in(p, std::ios::binary);
  const auto n_steps = detail::get<std::int64_t>(is);
  if (n_steps < 0) throw Error(ErrorKind::IoError, "bad boundary file");
  std::vector<std::vector<Contour>> out(static_cast<std::size_t>(n_steps));
  for (auto& loops : out) {
    const auto n_loops = detail::get<std::int64_t>(is);
    if (n_loops < 0) throw Error(ErrorKind::IoError, "bad boundary file");
    for (std::int64_t l = 0; l < n_loops; ++l) {
      const auto n = detail::get<std::int64_t>(is);
      if (n < 0) throw Error(ErrorKind::IoError, "bad boundary file");
      std::vector<Vec2> v(static_cast<std::size_t>(n));
      for (Vec2& x : v) {
        x.x = detail::get<double>(is);
        x.y = detail::get<double>(is);
      }
      loops.emplace_back(std::move(v));
    }
  }
  return out;
}

inline constexpr const char* kTraceColumns =
    "step,t,lambda,area,perimeter,kappa_dev,kappa_lambda_dev,hausdorff,el_residual_median,n_contours,tie_measure,"
    "solver_gap,solver_energy,solver_iters";
inline constexpr const char* kMotionColumns = "step,max_step_distance,kappa_abs_p99,gauss_bonnet_error,kappa_mean";

inline void write_trace_csv(const std::filesystem::path& p, const FlowTrace& tr) {
  auto os = detail::open_out(p);
  os << kTraceColumns << '\n';
  for (const FlowRecord& r : tr.records)
    os << r.step << ',' << fmt(r.t) << ',' << fmt(r.lambda) << ',' << fmt(r.area) << ',' << fmt(r.perimeter) << ','
       << fmt(r.kappa_dev) << ',' << fmt(r.kappa_lambda_dev) << ',' << fmt(r.hausdorff) << ','
       << fmt(r.el_residual_median) << ',' << r.n_contours << ',' << fmt(r.tie_measure) << ',' << fmt(r.solver_gap)
       << ',' << fmt(r.solver_energy) << ',' << r.solver_iters << '\n';
}

inline void write_motion_csv(const std::filesystem::path& p, const FlowTrace& tr) {
  auto os = detail::open_out(p);
  os << kMotionColumns << '\n';
  for (const FlowRecord& r : tr.records)
    os << r.step << ',' << fmt(r.max_step_distance) << ',' << fmt(r.kappa_abs_p99) << ',' << fmt(r.gauss_bonnet_error)
       << ',' << fmt(r.kappa_mean) << '\n';
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p, const std::string& header) {
  auto is = open_in(p);
  std::string line;
  if (!std::getline(is, line) || line != header) throw Error(ErrorKind::IoError, p.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    // nan/inf are written by %g and parsed by stod; anything else is malformed.
    throw Error(ErrorKind::IoError, "bad number '" + s + "'");
  }
  if (pos != s.size()) throw Error(ErrorKind::IoError, "bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Records from trace.csv and, when present, motion.csv.
inline std::vector<FlowRecord> read_records(const std::filesystem::path& trace_csv, const std::filesystem::path& motion_csv) {
  std::vector<FlowRecord> recs;
  for (const auto& c : detail::read_csv(trace_csv, kTraceColumns)) {
    if (c.size() != 14) throw Error(ErrorKind::IoError, "trace.csv row has wrong column count");
    FlowRecord r;
    r.step = std::stoi(c[0]);
    r.t = detail::to_double(c[1]);
    r.lambda = detail::to_double(c[2]);
    r.area = detail::to_double(c[3]);
    r.perimeter = detail::to_double(c[4]);
    r.kappa_dev = detail::to_double(c[5]);
    r.kappa_lambda_dev = detail::to_double(c[6]);
    r.hausdorff = detail::to_double(c[7]);
    r.el_residual_median = detail::to_double(c[8]);
    r.n_contours = std::stoi(c[9]);
    r.tie_measure = detail::to_double(c[10]);
    r.solver_gap = detail::to_double(c[11]);
    r.solver_energy = detail::to_double(c[12]);
    r.solver_iters = std::stoi(c[13]);
    recs.push_back(r);
  }
  if (std::filesystem::exists(motion_csv)) {
    const auto rows = detail::read_csv(motion_csv, kMotionColumns);
    if (rows.size() != recs.size()) throw Error(ErrorKind::IoError, "motion.csv and trace.csv disagree");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].size() != 5) throw Error(ErrorKind::IoError, "motion.csv row has wrong column count");
      recs[k].max_step_distance = detail::to_double(rows[k][1]);
      recs[k].kappa_abs_p99 = detail::to_double(rows[k][2]);
      recs[k].gauss_bonnet_error = detail::to_double(rows[k][3]);
      recs[k].kappa_mean = detail::to_double(rows[k][4]);
    }
  }
  return recs;
}

/// x, y, kappa, arclength per vertex, one block per loop.
inline void write_contours_csv(const std::filesystem::path& p, std::span<const Contour> loops, double spacing) {
  auto os = detail::open_out(p);
  os << "contour,x,y,kappa,arclength\n";
  for (std::size_t l = 0; l < loops.size(); ++l) {
    const Contour& c = loops[l];
    std::vector<double> kappa(c.size(), std::numeric_limits<double>::quiet_NaN());
    if (c.size() >= 16) kappa = curvature_profile(c, spacing).kappa;
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      os << l << ',' << fmt(c[k].x) << ',' << fmt(c[k].y) << ',' << fmt(kappa[k]) << ',' << fmt(s) << '\n';
      s += norm(c.wrap(static_cast<std::ptrdiff_t>(k) + 1) - c[k]);
    }
  }
}

/// 64-bit FNV-1a of a file's bytes.
inline std::uint64_t fnv1a_file(const std::filesystem::path& p) {
  auto is = detail::open_in(p, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace flatflow
