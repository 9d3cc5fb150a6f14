#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlmtl/dynamics.hpp"
#include "stlmtl/pipeline.hpp"

namespace stlmtl {

/// Columns: step, t, states..., controls... The final step has no control,
/// so its control cells are left empty.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, const LinearSystem& sys);

/// Columns: step, inputs...; exactly N_T rows.
void write_controls_csv(const std::filesystem::path& path, const StepMatrix& u, const std::vector<std::string>& names);

/// Reads a file written by write_controls_csv. Throws std::runtime_error on
/// malformed content.
StepMatrix read_controls_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json scp_result_json(const ScpResult& r);

// Static SVG line charts.

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// A shaded region between two curves sharing the same x.
struct Band {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Band> bands;
  bool zero_line = false;
};

/// Panels stacked vertically in one document.
std::string render_svg(const std::vector<Panel>& panels);
void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels);

}  // namespace stlmtl
