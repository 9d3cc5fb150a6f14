#include "stlmtl/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "stlmtl/dsl.hpp"

namespace stlmtl {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const LinearSystem& sys) {
  auto out = open_out(path);
  out << "step,t";
  for (const auto& v : sys.var_names) out << ',' << v;
  for (const auto& u : sys.u_names) out << ',' << u;
  out << '\n';
  const auto& x = traj.trace.states;
  const int N = traj.num_steps();
  for (int k = 0; k <= N; ++k) {
    out << k << ',' << format_number(k * sys.dt);
    for (Eigen::Index i = 0; i < x.cols(); ++i) out << ',' << format_number(x(k, i));
    for (Eigen::Index i = 0; i < traj.controls.cols(); ++i) {
      out << ',';
      if (k < N) out << format_number(traj.controls(k, i));
    }
    out << '\n';
  }
}

void write_controls_csv(const std::filesystem::path& path, const StepMatrix& u, const std::vector<std::string>& names) {
  auto out = open_out(path);
  out << "step";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index k = 0; k < u.rows(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < u.cols(); ++i) out << ',' << format_number(u(k, i));
    out << '\n';
  }
}

StepMatrix read_controls_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open controls file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("controls file '" + path.string() + "' is empty");
  const std::size_t cols = split(line, ',').size();
  if (cols < 2) throw std::runtime_error("controls file header needs a step column and at least one input");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != cols) throw std::runtime_error("controls file line " + std::to_string(lineno) + ": wrong column count");
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cells[i], &used));
        if (used != cells[i].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw std::runtime_error("controls file line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  StepMatrix u(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t i = 0; i + 1 < cols; ++i) u(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = rows[k][i];
  return u;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

nlohmann::json scp_result_json(const ScpResult& r) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["accepted_steps"] = r.accepted_steps;
  j["rho_exact"] = r.rho_exact;
  j["rho_exact_history"] = r.rho_exact_history;
  j["rho_smooth_history"] = r.rho_smooth_history;
  j["objective_history"] = r.objective_history;
  j["radius_history"] = r.radius_history;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 720;
constexpr double kPanelHeight = 280;
constexpr double kLeft = 70, kRight = 150, kTop = 30, kBottom = 45;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(lo <= hi)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

void draw_panel(std::ostringstream& svg, const Panel& p, double y0) {
  Range xr, yr;
  for (const auto& s : p.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  for (const auto& b : p.bands) {
    for (double v : b.x) xr.add(v);
    for (double v : b.lo) yr.add(v);
    for (double v : b.hi) yr.add(v);
  }
  if (p.zero_line) yr.add(0.0);
  xr.pad();
  yr.pad();
  const double w = kWidth - kLeft - kRight;
  const double h = kPanelHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * w; };
  auto sy = [&](double v) { return y0 + kTop + (yr.hi - v) / (yr.hi - yr.lo) * h; };

  svg << fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"#444\"/>\n",
                     kLeft, y0 + kTop, w, h);
  svg << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + w / 2, y0 + kTop - 10, escape(p.title));
  svg << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + w / 2, y0 + kPanelHeight - 8, escape(p.x_label));
  svg << fmt::format(
      "<text x=\"14\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2f})\">{}</text>\n",
      y0 + kTop + h / 2, y0 + kTop + h / 2, escape(p.y_label));
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    svg << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"middle\">{:.4g}</text>\n", sx(xv),
                       y0 + kTop + h + 14, xv);
    svg << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"end\">{:.4g}</text>\n",
                       kLeft - 4, sy(yv) + 3, yv);
  }
  if (p.zero_line && yr.lo < 0.0 && yr.hi > 0.0) {
    svg << fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n",
                       kLeft, sy(0.0), kLeft + w, sy(0.0));
  }
  for (std::size_t bi = 0; bi < p.bands.size(); ++bi) {
    const Band& b = p.bands[bi];
    std::string pts;
    for (std::size_t k = 0; k < b.x.size(); ++k) pts += fmt::format("{:.2f},{:.2f} ", sx(b.x[k]), sy(b.hi[k]));
    for (std::size_t k = b.x.size(); k-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", sx(b.x[k]), sy(b.lo[k]));
    svg << fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", pts,
                       kColors[bi % std::size(kColors)]);
  }
  for (std::size_t si = 0; si < p.series.size(); ++si) {
    const Series& s = p.series[si];
    const char* color = kColors[si % std::size(kColors)];
    std::string pts;
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (std::isfinite(s.y[k])) pts += fmt::format("{:.2f},{:.2f} ", sx(s.x[k]), sy(s.y[k]));
    }
    svg << fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", pts, color);
    const double ly = y0 + kTop + 14 + 16 * static_cast<double>(si);
    svg << fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       kLeft + w + 10, ly - 4, kLeft + w + 28, ly - 4, color);
    svg << fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\">{}</text>\n", kLeft + w + 32, ly,
                       escape(s.label));
  }
}

}  // namespace

std::string render_svg(const std::vector<Panel>& panels) {
  std::ostringstream svg;
  const double height = kPanelHeight * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  svg << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\">\n",
      kWidth, height, kWidth, height);
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) draw_panel(svg, panels[i], kPanelHeight * static_cast<double>(i));
  svg << "</svg>\n";
  return svg.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels) {
  auto out = open_out(path);
  out << render_svg(panels);
}

}  // namespace stlmtl
