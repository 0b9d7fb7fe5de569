#include "perfmc/array.hpp"

#include <cmath>
#include <limits>

namespace perfmc {

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.n1) + ", " + std::to_string(s.n2) + ", " + std::to_string(s.t) + "]";
}

namespace {

bool is_finite(double v) { return std::isfinite(v); }
bool is_finite(const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

}  // namespace

template <typename T>
void validate_series(const Series<T>& s, const char* context) {
  if (s.n1() < 2 || s.n2() < 2 || s.frames() < 2)
    throw DimensionError(std::string(context) + ": series must be at least 2x2x2, got " + to_string(s.shape()));
  for (const auto& v : s.data())
    if (!is_finite(v)) throw ConfigError(std::string(context) + ": series contains non-finite values");
}

template void validate_series(const Series<double>&, const char*);
template void validate_series(const Series<cplx>&, const char*);

ComplexSeries to_complex(const RealSeries& s) {
  ComplexSeries out(s.shape());
  out.casorati() = s.casorati().cast<cplx>();
  out.pixel_spacing = s.pixel_spacing;
  out.frame_interval = s.frame_interval;
  return out;
}

RealSeries magnitude(const ComplexSeries& s) {
  RealSeries out(s.shape());
  out.casorati() = s.casorati().cwiseAbs();
  out.pixel_spacing = s.pixel_spacing;
  out.frame_interval = s.frame_interval;
  return out;
}

RealSeries real_part(const ComplexSeries& s) {
  RealSeries out(s.shape());
  out.casorati() = s.casorati().real();
  out.pixel_spacing = s.pixel_spacing;
  out.frame_interval = s.frame_interval;
  return out;
}

std::vector<double> pixel_phase(const ComplexSeries& reference) {
  const auto m = reference.casorati();
  std::vector<double> phase(static_cast<std::size_t>(reference.pixels()));
  for (Index p = 0; p < m.rows(); ++p) {
    const cplx sum = m.row(p).sum();
    phase[static_cast<std::size_t>(p)] = std::arg(sum);
  }
  return phase;
}

RealSeries demodulate(const ComplexSeries& s, std::span<const double> phase) {
  if (static_cast<Index>(phase.size()) != s.pixels()) throw DimensionError("phase map does not match series");
  RealSeries out(s.shape());
  const auto in = s.casorati();
  auto o = out.casorati();
  for (Index p = 0; p < in.rows(); ++p) {
    const cplx rot = std::polar(1.0, -phase[static_cast<std::size_t>(p)]);
    for (Index f = 0; f < in.cols(); ++f) o(p, f) = (in(p, f) * rot).real();
  }
  out.pixel_spacing = s.pixel_spacing;
  out.frame_interval = s.frame_interval;
  return out;
}

Index SamplingMask::kept() const {
  Index n = 0;
  for (auto v : keep.data()) n += v != 0;
  return n;
}

double SamplingMask::achieved_rate() const {
  const Index k = kept();
  return k == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(keep.size()) / static_cast<double>(k);
}

SamplingMask full_mask(Shape shape) { return SamplingMask{Series<std::uint8_t>(shape, 1), 1.0}; }

}  // namespace perfmc
