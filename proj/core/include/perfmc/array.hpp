#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "perfmc/error.hpp"

namespace perfmc {

using Index = std::ptrdiff_t;
using cplx = std::complex<double>;

/// Extent of a dynamic 2-D image stack: n1 rows, n2 columns, t frames.
struct Shape {
  Index n1 = 0;
  Index n2 = 0;
  Index t = 0;

  Index pixels() const { return n1 * n2; }
  Index size() const { return n1 * n2 * t; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense n1 x n2 x t image series.
///
/// Storage is frame-contiguous and row-major inside a frame, so frame f occupies
/// [f*n1*n2, (f+1)*n1*n2) and pixel (i, j) of that frame sits at offset i*n2 + j.
/// With this layout the Casorati matrix (one column per frame) is a zero-copy
/// column-major view of the buffer.
template <typename T>
class Series {
 public:
  using value_type = T;
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Series() = default;
  explicit Series(Shape shape, T fill = T{}) : shape_(shape), data_(static_cast<std::size_t>(shape.size()), fill) {
    if (shape.n1 < 0 || shape.n2 < 0 || shape.t < 0) throw DimensionError("negative extent " + to_string(shape));
  }

  /// Builds a series from an n x t Casorati matrix.
  static Series from_casorati(Shape shape, const Eigen::Ref<const Matrix>& m) {
    if (m.rows() != shape.pixels() || m.cols() != shape.t)
      throw DimensionError("Casorati matrix does not match " + to_string(shape));
    Series s(shape);
    s.casorati() = m;
    return s;
  }

  const Shape& shape() const { return shape_; }
  Index n1() const { return shape_.n1; }
  Index n2() const { return shape_.n2; }
  Index frames() const { return shape_.t; }
  Index pixels() const { return shape_.pixels(); }
  Index size() const { return shape_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(Index i, Index j, Index f) { return data_[offset(i, j, f)]; }
  const T& operator()(Index i, Index j, Index f) const { return data_[offset(i, j, f)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  std::span<T> frame(Index f) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(f * pixels()), static_cast<std::size_t>(pixels()));
  }
  std::span<const T> frame(Index f) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(f * pixels()),
                                             static_cast<std::size_t>(pixels()));
  }

  MatrixMap casorati() { return MatrixMap(data_.data(), pixels(), frames()); }
  ConstMatrixMap casorati() const { return ConstMatrixMap(data_.data(), pixels(), frames()); }

  std::array<double, 2> pixel_spacing{1.0, 1.0};  // mm
  double frame_interval = 1.0;                    // heartbeats

 private:
  std::size_t offset(Index i, Index j, Index f) const {
    return static_cast<std::size_t>((f * shape_.n1 + i) * shape_.n2 + j);
  }

  Shape shape_{};
  std::vector<T> data_;
};

using ComplexSeries = Series<cplx>;
using RealSeries = Series<double>;

template <typename A, typename B>
void require_same_shape(const Series<A>& a, const Series<B>& b, const char* context) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(context) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

/// Checks n1, n2, t >= 2 and that every value is finite.
template <typename T>
void validate_series(const Series<T>& s, const char* context);

template <typename T>
Series<T> operator+(const Series<T>& a, const Series<T>& b) {
  require_same_shape(a, b, "series sum");
  Series<T> out = a;
  out.casorati() += b.casorati();
  return out;
}

template <typename T>
Series<T> operator-(const Series<T>& a, const Series<T>& b) {
  require_same_shape(a, b, "series difference");
  Series<T> out = a;
  out.casorati() -= b.casorati();
  return out;
}

template <typename T>
Series<T> operator*(double c, const Series<T>& a) {
  Series<T> out = a;
  out.casorati() *= c;
  return out;
}

ComplexSeries to_complex(const RealSeries& s);
RealSeries magnitude(const ComplexSeries& s);
RealSeries real_part(const ComplexSeries& s);

/// Per-pixel phase reference: arg of the temporal sum of `reference` at each pixel.
std::vector<double> pixel_phase(const ComplexSeries& reference);

/// Real component of `s` after removing the per-pixel phase `phase`.
/// Unlike the magnitude, this keeps the sign of difference images.
RealSeries demodulate(const ComplexSeries& s, std::span<const double> phase);

/// Binary k-space sampling pattern with its target acceleration.
struct SamplingMask {
  Series<std::uint8_t> keep;
  double rate = 1.0;

  const Shape& shape() const { return keep.shape(); }
  Index kept() const;
  double achieved_rate() const;
};

SamplingMask full_mask(Shape shape);

/// Undersampled spectrum; exactly zero wherever the mask is zero.
struct KSpaceData {
  ComplexSeries samples;
  SamplingMask mask;

  const Shape& shape() const { return samples.shape(); }
};

}  // namespace perfmc
