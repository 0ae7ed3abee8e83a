#pragma once

#include "nanowb/mechcore.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nanowb {

/// Cell-centered scalar field on a regular nx*ny layout, row-major (row j, column i).
/// Missing values (recovery gaps) are stored as quiet NaN and written as "nan".
struct FieldFrame {
  std::string name;
  double time = 0.0;
  int nx = 0;
  int ny = 0;
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  std::vector<double> values;

  static constexpr double missing() { return std::numeric_limits<double>::quiet_NaN(); }
  static bool is_missing(double v) { return std::isnan(v); }

  double& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * nx + i]; }
  double dx() const { return (xmax - xmin) / nx; }
  double dy() const { return (ymax - ymin) / ny; }
  Vec2 center(int i, int j) const { return {xmin + (i + 0.5) * dx(), ymin + (j + 0.5) * dy()}; }
  /// Throws InvalidArgument if the value count or bounds are inconsistent.
  void validate() const;
};

/// A localization band found by detect_bands.
struct Band {
  std::vector<int> cells;  // row-major cell ids, ascending
  double angle_deg = 0.0;  // acute angle to the loading axis, [0, 90]
  double axis_deg = 0.0;   // principal-axis direction from +x, [0, 180)
  double width = 0.0;      // um
  double length = 0.0;     // um
  double peak = 0.0;
  double mean = 0.0;
  Vec2 centroid;
};

struct BandOptions {
  double threshold_factor = 3.0;
  int min_cells = 10;
  /// Loading axis direction in degrees from +x (90 = tension along y).
  double load_axis_deg = 90.0;
};

/// Equivalent plastic strain intensity sqrt(2/3 (xx^2 + yy^2 + 2 xy^2 + zz^2)).
double plastic_strain_intensity(const Deviator& eps_p);

/// Per-cell intensity frame from the plastic strain tensor components.
FieldFrame eq_plastic_intensity(std::span<const Deviator> eps_p, int nx, int ny, double xmin, double xmax,
                                double ymin, double ymax, double time = 0.0);

std::vector<Band> detect_bands(const FieldFrame& intensity, const BandOptions& options = {});

double mean_value(const FieldFrame& frame);
double max_value(const FieldFrame& frame);

/// Formats like printf("%.9e") but with a compact exponent: 0.000000000e0, 1.250000000e-3.
std::string format_sci9(double v);

void export_field_csv(const FieldFrame& frame, const std::string& path);
std::string field_to_csv(const FieldFrame& frame);
FieldFrame read_field_csv(const std::string& path);
FieldFrame field_from_csv(const std::string& text);

/// Linear viridis colormap, `scale` pixels per cell, min/max written to tEXt chunks.
void export_field_png(const FieldFrame& frame, const std::string& path, int scale = 0);

/// RGB pixel buffer used by the PNG writer (row 0 is the top of the domain).
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;
};
RgbImage render_field(const FieldFrame& frame, int scale);
std::array<unsigned char, 3> viridis(double t);

}  // namespace nanowb
