#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "perfmc/array.hpp"

namespace perfmc {

/// Row-major 2-D image.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Image frame_image(const RealSeries& s, Index f);
void set_frame(RealSeries& s, Index f, const Image& img);

/// Per-pixel (row, col) displacement in pixels. A field u maps a moving image
/// onto the static grid as warped(x) = moving(x + u(x)).
struct DisplacementField {
  Image dy;
  Image dx;

  DisplacementField() = default;
  DisplacementField(Index rows, Index cols) : dy(Image::Zero(rows, cols)), dx(Image::Zero(rows, cols)) {}

  Index rows() const { return dy.rows(); }
  Index cols() const { return dy.cols(); }
  double max_abs() const;
  double mean_norm() const;
};

enum class ReferenceStrategy { first_frame, min_motion_frame };
ReferenceStrategy parse_reference_strategy(std::string_view name);
std::string to_string(ReferenceStrategy r);

struct RegistrationConfig {
  double alpha = 2.0;
  double sigma_fluid = 1.0;      // px, force smoothing
  double sigma_diffusion = 1.5;  // px, field smoothing
  int iters = 100;
  double stop_delta = 1e-3;  // px, mean update norm
  ReferenceStrategy reference_strategy = ReferenceStrategy::min_motion_frame;

  void validate() const;
};

/// Central-difference gradient (one-sided at the border).
void gradient(const Image& img, Image& gy, Image& gx);

/// Symmetric demons force
///   u = (x_d - x_1) grad x_1 / (|grad x_1|^2 + alpha (x_d - x_1)^2)
///     + (x_d - x_1) grad x_d / (|grad x_d|^2 + alpha (x_d - x_1)^2)
/// with x_1 static and x_d the warped moving image. Terms whose denominator is
/// below 1e-9 contribute zero. The force points away from alignment under the
/// warped(x) = moving(x + u) convention, so registration subtracts it.
DisplacementField demons_force(const Image& fixed, const Image& moving_warped, double alpha);

/// Bilinear resampling of `moving` at x + u(x), clamped at the borders.
Image warp(const Image& moving, const DisplacementField& u);

/// Separable Gaussian smoothing with replicated borders.
Image gaussian_smooth(const Image& img, double sigma);

double ssd(const Image& a, const Image& b);

struct PairRegistration {
  DisplacementField field;
  Image warped;
  std::vector<double> ssd_trace;  // SSD of the warped image before each iteration, then the final SSD
  int iterations = 0;
};

/// Single-scale demons: warp, force, fluid smoothing, accumulate, diffusion
/// smoothing; stops when the mean update norm drops below cfg.stop_delta.
/// A step that would raise the SSD is halved (at most four times); if none of
/// the shortened steps descends, registration stops, so the SSD trace is
/// non-increasing. Throws NumericalError if the SSD grows beyond twice its
/// initial value.
PairRegistration register_pair(const Image& fixed, const Image& moving, const RegistrationConfig& cfg);

struct SeriesRegistration {
  RealSeries registered;
  std::vector<DisplacementField> fields;
  std::vector<std::vector<double>> ssd_traces;
  Index reference = 0;
};

/// Reference frame for register_series. min_motion_frame takes the frame
/// closest to the temporal mean of `series`; when `periodic` is given the
/// choice is restricted to the frames whose periodic part deviates least from
/// its own temporal mean.
Index choose_reference(const RealSeries& series, const RegistrationConfig& cfg, const RealSeries* periodic = nullptr);

/// Registers every frame independently to the reference frame, which passes
/// through unchanged. Failures carry the frame index.
SeriesRegistration register_series(const RealSeries& series, const RegistrationConfig& cfg,
                                   const RealSeries* periodic = nullptr);

/// M_mc = L_reg + Q.
RealSeries recombine(const RealSeries& l_reg, const RealSeries& q);

/// Fields as one float32 array of shape [n1, n2, 2, t] (component 0 = row).
std::vector<float> pack_fields(const std::vector<DisplacementField>& fields);
std::vector<DisplacementField> unpack_fields(std::span<const float> values, Index n1, Index n2, Index t);

/// `registration.csv` with columns frame,iter,ssd.
void write_registration_csv(const std::filesystem::path& path, const SeriesRegistration& reg);

}  // namespace perfmc
