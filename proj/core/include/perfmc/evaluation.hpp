#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "perfmc/array.hpp"

namespace perfmc {

/// sqrt(mean |x - reference|^2) / max |reference|.
double rmse(const ComplexSeries& x, const ComplexSeries& reference);
double rmse(const RealSeries& x, const RealSeries& reference);

using Point = std::array<double, 2>;  // (row, col) in pixels

/// Six equal-angle myocardial sectors around the LV center. Sector 1 starts at
/// the ray from the LV center through the middle of the septum and sectors are
/// numbered clockwise as displayed (rows down, columns right). Angles use
/// half-open intervals [60(k-1), 60k) degrees.
struct SectorDefinition {
  Point lv_center{};
  Point septum_mid{};
  double inner_radius = 0.0;
  double outer_radius = 0.0;

  void validate() const;
};

/// Label image, row-major, values 0 (outside annulus) or 1..6.
struct SectorLabels {
  Index n1 = 0;
  Index n2 = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t operator()(Index i, Index j) const { return labels[static_cast<std::size_t>(i * n2 + j)]; }
  std::array<Index, 6> counts() const;
};

SectorLabels segment_sectors(const SectorDefinition& def, Index n1, Index n2);

/// Clockwise angle in [0, 2pi) from the septum ray to the ray through (row, col).
double clockwise_angle(const SectorDefinition& def, double row, double col);

struct TimeIntensityCurves {
  Eigen::MatrixXd values;  // 6 x t, mean sector intensity per frame
  std::array<Index, 6> sector_pixel_counts{};

  Index frames() const { return values.cols(); }
};

/// Mean intensity per sector and frame. The real overload averages the values
/// as given (and is therefore linear); the complex overload averages magnitudes.
TimeIntensityCurves extract_curves(const RealSeries& series, const SectorDefinition& def);
TimeIntensityCurves extract_curves(const ComplexSeries& series, const SectorDefinition& def);

/// RMSE between two curve sets, normalized by max |reference|.
double curve_rmse(const TimeIntensityCurves& curves, const TimeIntensityCurves& reference);

/// Disk that contains the LV blood pool over the whole respiratory excursion.
struct MotionRoi {
  Point center{};
  double radius = 0.0;
};

struct ResidualMotion {
  double mean_px = 0.0;
  double max_px = 0.0;
  std::vector<Point> centroids;
};

/// Tracks the LV-pool centroid per frame (pixels inside the ROI at or above
/// 50% of the ROI maximum) and reports the mean/max distance to the centroid of
/// `reference_frame`. Throws NumericalError if a frame has no pixel above the
/// threshold.
ResidualMotion residual_motion(const RealSeries& series, const MotionRoi& roi, Index reference_frame);

/// `curves.csv`: header frame,sector1,...,sector6.
void write_curves_csv(const std::filesystem::path& path, const TimeIntensityCurves& curves);

/// `sectors.json`: {"lv_center": [r, c], "septum_mid": [r, c], "inner_radius": r0, "outer_radius": r1}.
SectorDefinition read_sectors_json(const std::filesystem::path& path);
void write_sectors_json(const std::filesystem::path& path, const SectorDefinition& def);

}  // namespace perfmc
