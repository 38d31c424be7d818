#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "genbench/error.hpp"
#include "genbench/harness.hpp"
#include "genbench/keyvalue.hpp"

namespace genbench {

namespace {

constexpr double kLogMin = -14.0;
constexpr double kLogMax = 2.0;
constexpr int kCell = 22;
constexpr int kMargin = 70;

struct Rgb {
  double r, g, b;
};

// Viridis sampled at nine evenly spaced points.
constexpr std::array<Rgb, 9> kViridis{{{68, 1, 84},
                                       {71, 45, 123},
                                       {59, 82, 139},
                                       {44, 114, 142},
                                       {33, 145, 140},
                                       {40, 174, 128},
                                       {94, 201, 98},
                                       {173, 220, 48},
                                       {253, 231, 37}}};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw Error(ErrorKind::Io, "error while writing " + path.string());
}

std::string num(double v) { return format_double(v); }

}  // namespace

std::string heat_colour(double value) {
  if (std::isnan(value)) return "#bbbbbb";
  const double lg = value > 0.0 ? std::log10(value) : kLogMin;
  const double t = (std::clamp(lg, kLogMin, kLogMax) - kLogMin) / (kLogMax - kLogMin);
  const double pos = t * static_cast<double>(kViridis.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), kViridis.size() - 2);
  const double f = pos - static_cast<double>(i);
  const Rgb& a = kViridis[i];
  const Rgb& b = kViridis[i + 1];
  auto ch = [f](double x, double y) { return static_cast<int>(std::lround(x + (y - x) * f)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", ch(a.r, b.r), ch(a.g, b.g), ch(a.b, b.b));
  return buf;
}

void write_evalgrid_csv(const EvalGrid& grid, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "train\\test";
  for (const auto& n : grid.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < grid.names.size(); ++i) {
    out << grid.names[i];
    for (std::size_t j = 0; j < grid.names.size(); ++j)
      out << ',' << num(grid.mse(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
  close_out(out, path);
}

void emit_heatmap(const EvalGrid& grid, const std::vector<FamilyDescriptor>& families,
                  const std::filesystem::path& path) {
  const int n = static_cast<int>(grid.names.size());
  if (n == 0 || families.size() != grid.names.size())
    throw Error(ErrorKind::InvalidSpec, "heatmap needs a populated grid and its family list");
  const int side = kMargin + n * kCell;
  const int bar_x = side + 20;
  const int width = bar_x + 80;
  const int height = side + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"9\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = grid.mse(i, j);
      svg << "<rect class=\"cell\" x=\"" << kMargin + j * kCell << "\" y=\"" << kMargin + i * kCell
          << "\" width=\"" << kCell << "\" height=\"" << kCell << "\" fill=\"" << heat_colour(v)
          << "\"><title>" << grid.names[static_cast<std::size_t>(i)] << " -> "
          << grid.names[static_cast<std::size_t>(j)] << ": " << num(v) << "</title></rect>\n";
    }
  }
  for (int i = 0; i < n; ++i) {
    const int c = kMargin + i * kCell + kCell / 2;
    svg << "<text x=\"" << kMargin - 4 << "\" y=\"" << c + 3 << "\" text-anchor=\"end\">"
        << grid.names[static_cast<std::size_t>(i)] << "</text>\n";
    svg << "<text transform=\"translate(" << c + 3 << "," << kMargin - 4
        << ") rotate(-90)\">" << grid.names[static_cast<std::size_t>(i)] << "</text>\n";
  }
  for (int i = 1; i < n; ++i) {
    if (families[static_cast<std::size_t>(i)].family == families[static_cast<std::size_t>(i - 1)].family)
      continue;
    const int at = kMargin + i * kCell;
    svg << "<line class=\"sep\" x1=\"" << at << "\" y1=\"" << kMargin << "\" x2=\"" << at << "\" y2=\""
        << side << "\" stroke=\"white\" stroke-width=\"2\"/>\n";
    svg << "<line class=\"sep\" x1=\"" << kMargin << "\" y1=\"" << at << "\" x2=\"" << side << "\" y2=\""
        << at << "\" stroke=\"white\" stroke-width=\"2\"/>\n";
  }
  const int steps = static_cast<int>(kLogMax - kLogMin);
  const int bar_h = (n * kCell) / steps;
  for (int s = 0; s < steps; ++s) {
    const double lg = kLogMax - s - 0.5;
    svg << "<rect class=\"legend\" x=\"" << bar_x << "\" y=\"" << kMargin + s * bar_h << "\" width=\"14\" height=\""
        << bar_h << "\" fill=\"" << heat_colour(std::pow(10.0, lg)) << "\"/>\n";
  }
  for (int s = 0; s <= steps; s += 2) {
    svg << "<text x=\"" << bar_x + 18 << "\" y=\"" << kMargin + s * bar_h + 3 << "\">1e"
        << static_cast<int>(kLogMax) - s << "</text>\n";
  }
  svg << "</svg>\n";

  auto out = open_out(path);
  out << svg.str();
  close_out(out, path);
}

void emit_report(const EvalGrid& grid, const std::vector<FamilyDescriptor>& families,
                 const std::filesystem::path& dir, double wiggle) {
  write_evalgrid_csv(grid, dir / "evalgrid.csv");
  emit_heatmap(grid, families, dir / "evalgrid.svg");
  const std::size_t n = grid.names.size();

  {
    const auto path = dir / "cells.csv";
    auto out = open_out(path);
    out << "train_family,test_family,chosen_seed,train_mse,test_mse\n";
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const CellMeta& m = grid.cell(i, j);
        out << m.train_family << ',' << m.test_family << ',' << m.chosen_seed << ','
            << num(m.train_mse) << ','
            << num(grid.mse(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << '\n';
      }
    close_out(out, path);
  }
  {
    const auto path = dir / "runs.csv";
    auto out = open_out(path);
    out << "train_family,seed,diverged,train_mse,message\n";
    for (const auto& r : grid.runs) {
      std::string msg = r.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << grid.names[r.row] << ',' << r.seed << ',' << (r.diverged ? "true" : "false") << ','
          << num(r.train_mse) << ',' << msg << '\n';
    }
    close_out(out, path);
  }

  KeyValue kv;
  kv.set("families", static_cast<std::int64_t>(n));
  std::size_t diverged = 0;
  for (const auto& r : grid.runs) diverged += r.diverged ? 1 : 0;
  kv.set("runs", static_cast<std::int64_t>(grid.runs.size()));
  kv.set("diverged_runs", static_cast<std::int64_t>(diverged));
  std::string failed;
  for (auto r : grid.failed_rows) failed += (failed.empty() ? "" : ",") + grid.names[r];
  kv.set("failed_rows", failed.empty() ? std::string("none") : failed);
  std::size_t diag_min_rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = grid.mse.row(static_cast<Eigen::Index>(i));
    const double d = row(static_cast<Eigen::Index>(i));
    const bool is_min = d <= 1.01 * row.minCoeff();
    diag_min_rows += is_min ? 1 : 0;
    const std::string key = "row." + grid.names[i];
    kv.set(key + ".seed", grid.cell(i, i).chosen_seed);
    kv.set(key + ".train_mse", grid.cell(i, i).train_mse);
    kv.set(key + ".diagonal_mse", d);
    kv.set(key + ".max_test_mse", row.maxCoeff());
  }
  kv.set("rows_with_diagonal_minimum", static_cast<std::int64_t>(diag_min_rows));
  std::size_t contained = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && subspace_contained(families[j], families[i])) ++contained;
  const auto violations = containment_violations(grid, families, wiggle);
  kv.set("wiggle", wiggle);
  kv.set("contained_cells", static_cast<std::int64_t>(contained));
  kv.set("containment_violations", static_cast<std::int64_t>(violations.size()));
  std::string list;
  for (const auto& v : violations)
    list += (list.empty() ? "" : " ") + grid.names[v.row] + "->" + grid.names[v.col];
  kv.set("containment_violation_cells", list.empty() ? std::string("none") : list);
  kv.write(dir / "report.txt");
}

void write_theory_csv(const TheoryReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "p,n_grid,q,linear_empirical,linear_predicted,fd_empirical,fd_predicted_forcing,"
         "fd_predicted_solution\n";
  for (const auto& r : report.rows)
    out << r.p << ',' << report.n_grid << ',' << report.q << ',' << num(r.linear_empirical) << ','
        << num(r.linear_predicted) << ',' << num(r.fd_empirical) << ',' << num(r.fd_predicted_forcing)
        << ',' << num(r.fd_predicted_solution) << '\n';
  close_out(out, path);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "q,n_grid,p,w,train_mse,relative_error\n";
  for (const auto& r : rows)
    out << r.q << ',' << r.n_grid << ',' << r.p << ',' << num(r.w) << ',' << num(r.train_mse) << ','
        << num(r.relative_error) << '\n';
  close_out(out, path);
}

}  // namespace genbench
