#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>

#include <Eigen/Core>

#include "perfmc/array.hpp"
#include "perfmc/evaluation.hpp"

namespace perfmc {

struct Ellipse {
  Point center{};
  double semi_row = 0.0;
  double semi_col = 0.0;

  /// Inside test in pixel coordinates.
  bool contains(double row, double col) const;
  /// True if this ellipse lies entirely inside `outer`, checked on the boundary.
  bool inside(const Ellipse& outer) const;
};

/// baseline + amplitude * g((frame - arrival) / (k theta)), where
/// g(s) = s^k exp(k (1 - s)) peaks at 1 for s = 1 and is zero for s <= 0.
struct BolusCurve {
  double baseline = 0.0;
  double amplitude = 0.0;
  double arrival = 0.0;
  double shape_k = 3.0;
  double scale_theta = 1.5;

  double at(double frame) const;
  double peak_frame() const { return arrival + shape_k * scale_theta; }
};

struct Respiration {
  double amplitude_px = 3.0;
  Index period_frames = 5;
  int axis = 0;  // 0: rows (superior-inferior), 1: columns
};

/// Ellipse scene: body, RV blood pool, LV myocardium (outer ellipse) and LV
/// blood pool painted in that order. The myocardial annulus is the myocardium
/// ellipse minus the LV pool.
struct PhantomSpec {
  Shape shape{64, 64, 32};
  std::array<double, 2> pixel_mm{2.0, 2.0};
  double slice_mm = 5.0;

  Ellipse body;
  Ellipse rv;
  Ellipse myocardium;
  Ellipse lv_pool;

  double body_intensity = 0.05;
  BolusCurve rv_bolus;
  BolusCurve lv_bolus;
  BolusCurve myo_bolus;

  Respiration respiration;
  double snr = 30.0;  // infinity disables noise
  std::uint64_t seed = 0;
  int supersample = 4;

  void validate() const;

  /// 64x64x32 scene.
  static PhantomSpec desk();
  /// 224x192x32 scene (2 mm pixels).
  static PhantomSpec paper();

  /// Six sectors on the myocardial annulus with the septum toward the RV,
  /// shrunk by one pixel on each side to stay clear of partial-volume edges.
  SectorDefinition sectors() const;
  /// LV pool disk enlarged to cover the respiratory excursion.
  MotionRoi lv_roi() const;
};

struct PhantomTruth {
  ComplexSeries clean;      // with motion, no noise
  RealSeries static_clean;  // no motion, no noise
  std::vector<Point> trajectory;  // per-frame (dy, dx) translation in px
  Eigen::MatrixXd compartment_curves;  // 3 x t: RV pool, LV pool, myocardium
  SectorDefinition sectors;
  TimeIntensityCurves sector_curves;  // of static_clean
  double noise_sigma = 0.0;  // total complex sigma; each component carries sigma/sqrt(2)
};

struct Phantom {
  ComplexSeries noisy;
  PhantomTruth truth;
};

Phantom generate_phantom(const PhantomSpec& spec);

/// Cartesian undersampling of a phantom series; rate must be 1, 2, 4, 8 or 12.
KSpaceData undersample_phantom(const ComplexSeries& series, double rate, std::uint64_t seed);

/// `truth.json`: trajectory, compartment and sector curves, geometry.
void write_truth_json(const std::filesystem::path& path, const PhantomSpec& spec, const PhantomTruth& truth);

}  // namespace perfmc
