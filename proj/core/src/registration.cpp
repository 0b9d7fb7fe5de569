#include "perfmc/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace perfmc {

Image frame_image(const RealSeries& s, Index f) {
  const auto fr = s.frame(f);
  return Eigen::Map<const Image>(fr.data(), s.n1(), s.n2());
}

void set_frame(RealSeries& s, Index f, const Image& img) {
  if (img.rows() != s.n1() || img.cols() != s.n2()) throw DimensionError("set_frame: image does not match series");
  auto fr = s.frame(f);
  Eigen::Map<Image>(fr.data(), s.n1(), s.n2()) = img;
}

double DisplacementField::max_abs() const {
  if (dy.size() == 0) return 0.0;
  return std::max(dy.abs().maxCoeff(), dx.abs().maxCoeff());
}

double DisplacementField::mean_norm() const {
  if (dy.size() == 0) return 0.0;
  return (dy.square() + dx.square()).sqrt().mean();
}

ReferenceStrategy parse_reference_strategy(std::string_view name) {
  if (name == "first_frame") return ReferenceStrategy::first_frame;
  if (name == "min_motion_frame") return ReferenceStrategy::min_motion_frame;
  throw ConfigError("unknown reference strategy '" + std::string(name) + "'");
}

std::string to_string(ReferenceStrategy r) {
  return r == ReferenceStrategy::first_frame ? "first_frame" : "min_motion_frame";
}

void RegistrationConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("registration config: alpha must be > 0");
  if (!(sigma_fluid > 0.0) || !(sigma_diffusion > 0.0)) throw ConfigError("registration config: sigmas must be > 0");
  if (iters < 1) throw ConfigError("registration config: iters must be >= 1");
  if (!(stop_delta >= 0.0)) throw ConfigError("registration config: stop_delta must be >= 0");
}

void gradient(const Image& img, Image& gy, Image& gx) {
  const Index rows = img.rows();
  const Index cols = img.cols();
  gy.resize(rows, cols);
  gx.resize(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const Index i0 = std::max<Index>(i - 1, 0), i1 = std::min(i + 1, rows - 1);
      const Index j0 = std::max<Index>(j - 1, 0), j1 = std::min(j + 1, cols - 1);
      gy(i, j) = i1 > i0 ? (img(i1, j) - img(i0, j)) / static_cast<double>(i1 - i0) : 0.0;
      gx(i, j) = j1 > j0 ? (img(i, j1) - img(i, j0)) / static_cast<double>(j1 - j0) : 0.0;
    }
  }
}

DisplacementField demons_force(const Image& fixed, const Image& moving_warped, double alpha) {
  if (fixed.rows() != moving_warped.rows() || fixed.cols() != moving_warped.cols())
    throw DimensionError("demons_force: image shapes differ");
  constexpr double kGuard = 1e-9;
  Image fy, fx, my, mx;
  gradient(fixed, fy, fx);
  gradient(moving_warped, my, mx);

  DisplacementField u(fixed.rows(), fixed.cols());
  for (Index i = 0; i < fixed.rows(); ++i) {
    for (Index j = 0; j < fixed.cols(); ++j) {
      const double diff = moving_warped(i, j) - fixed(i, j);
      if (diff == 0.0) continue;
      const double a2 = alpha * diff * diff;
      const double d1 = fy(i, j) * fy(i, j) + fx(i, j) * fx(i, j) + a2;
      const double d2 = my(i, j) * my(i, j) + mx(i, j) * mx(i, j) + a2;
      if (d1 >= kGuard) {
        u.dy(i, j) += diff * fy(i, j) / d1;
        u.dx(i, j) += diff * fx(i, j) / d1;
      }
      if (d2 >= kGuard) {
        u.dy(i, j) += diff * my(i, j) / d2;
        u.dx(i, j) += diff * mx(i, j) / d2;
      }
    }
  }
  return u;
}

Image warp(const Image& moving, const DisplacementField& u) {
  const Index rows = moving.rows();
  const Index cols = moving.cols();
  if (u.rows() != rows || u.cols() != cols) throw DimensionError("warp: field does not match image");
  Image out(rows, cols);
  const double ymax = static_cast<double>(rows - 1);
  const double xmax = static_cast<double>(cols - 1);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double y = std::clamp(static_cast<double>(i) + u.dy(i, j), 0.0, ymax);
      const double x = std::clamp(static_cast<double>(j) + u.dx(i, j), 0.0, xmax);
      const auto y0 = static_cast<Index>(std::floor(y));
      const auto x0 = static_cast<Index>(std::floor(x));
      const Index y1 = std::min(y0 + 1, rows - 1);
      const Index x1 = std::min(x0 + 1, cols - 1);
      const double wy = y - static_cast<double>(y0);
      const double wx = x - static_cast<double>(x0);
      const double top = wx == 0.0 ? moving(y0, x0) : (1.0 - wx) * moving(y0, x0) + wx * moving(y0, x1);
      const double bottom = wx == 0.0 ? moving(y1, x0) : (1.0 - wx) * moving(y1, x0) + wx * moving(y1, x1);
      out(i, j) = wy == 0.0 ? top : (1.0 - wy) * top + wy * bottom;
    }
  }
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<Index>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (Index i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

Image gaussian_smooth(const Image& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const auto k = gaussian_kernel(sigma);
  const auto radius = static_cast<Index>(k.size() / 2);
  const Index rows = img.rows();
  const Index cols = img.cols();
  Image tmp(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (Index o = -radius; o <= radius; ++o)
        acc += k[static_cast<std::size_t>(o + radius)] * img(i, std::clamp<Index>(j + o, 0, cols - 1));
      tmp(i, j) = acc;
    }
  }
  Image out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (Index o = -radius; o <= radius; ++o)
        acc += k[static_cast<std::size_t>(o + radius)] * tmp(std::clamp<Index>(i + o, 0, rows - 1), j);
      out(i, j) = acc;
    }
  }
  return out;
}

double ssd(const Image& a, const Image& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("ssd: image shapes differ");
  return (a - b).square().sum();
}

PairRegistration register_pair(const Image& fixed, const Image& moving, const RegistrationConfig& cfg) {
  cfg.validate();
  if (fixed.rows() != moving.rows() || fixed.cols() != moving.cols())
    throw DimensionError("register_pair: image shapes differ");
  if (!fixed.allFinite() || !moving.allFinite()) throw ConfigError("register_pair: images must be finite");

  PairRegistration out;
  out.field = DisplacementField(fixed.rows(), fixed.cols());
  out.warped = moving;
  const double initial = ssd(fixed, moving);

  double current = initial;
  for (int it = 1; it <= cfg.iters; ++it) {
    out.ssd_trace.push_back(current);
    out.iterations = it;
    if (current > 2.0 * initial && current > 0.0)
      throw NumericalError("registration failure: SSD grew from " + std::to_string(initial) + " to " +
                           std::to_string(current) + " at iteration " + std::to_string(it));

    DisplacementField force = demons_force(fixed, out.warped, cfg.alpha);
    // The two force terms each estimate the full correction; average them.
    const Image step_y = -0.5 * gaussian_smooth(force.dy, cfg.sigma_fluid);
    const Image step_x = -0.5 * gaussian_smooth(force.dx, cfg.sigma_fluid);
    double update = (step_y.square() + step_x.square()).sqrt().mean();
    if (update < cfg.stop_delta) break;

    // Backtrack until the SSD does not increase; no descent ends the run.
    bool accepted = false;
    for (double scale = 1.0; scale >= 1.0 / 16.0 && !accepted; scale *= 0.5) {
      DisplacementField trial;
      trial.dy = gaussian_smooth(out.field.dy + scale * step_y, cfg.sigma_diffusion);
      trial.dx = gaussian_smooth(out.field.dx + scale * step_x, cfg.sigma_diffusion);
      Image warped = warp(moving, trial);
      const double trial_ssd = ssd(fixed, warped);
      if (!(trial_ssd <= current)) continue;
      out.field = std::move(trial);
      out.warped = std::move(warped);
      current = trial_ssd;
      update *= scale;
      accepted = true;
    }
    if (!accepted || update < cfg.stop_delta) break;
  }
  out.ssd_trace.push_back(ssd(fixed, out.warped));
  if (!out.warped.allFinite() || !out.field.dy.allFinite() || !out.field.dx.allFinite())
    throw NumericalError("registration failure: non-finite displacement field");
  return out;
}

Index choose_reference(const RealSeries& series, const RegistrationConfig& cfg, const RealSeries* periodic) {
  if (cfg.reference_strategy == ReferenceStrategy::first_frame) return 0;
  const auto deviation = [](const RealSeries& s) {
    const Eigen::VectorXd mean = s.casorati().rowwise().mean();
    return ((s.casorati().colwise() - mean).colwise().squaredNorm()).transpose().eval();
  };
  const Eigen::VectorXd to_mean = deviation(series);
  Eigen::VectorXd score = to_mean;
  if (periodic != nullptr) {
    require_same_shape(series, *periodic, "choose_reference");
    // The periodic part may carry a static offset; only the deviation from it is motion.
    const Eigen::VectorXd motion = deviation(*periodic);
    // Frames at the same phase tie; among them prefer the one closest to the series mean.
    const double tie = motion.minCoeff() + 1e-12 * motion.maxCoeff();
    for (Index f = 0; f < score.size(); ++f)
      if (motion(f) > tie) score(f) = std::numeric_limits<double>::infinity();
  }
  Index best = 0;
  score.minCoeff(&best);
  return best;
}

SeriesRegistration register_series(const RealSeries& series, const RegistrationConfig& cfg, const RealSeries* periodic) {
  cfg.validate();
  validate_series(series, "register_series");
  SeriesRegistration out;
  out.reference = choose_reference(series, cfg, periodic);
  out.registered = series;
  out.fields.assign(static_cast<std::size_t>(series.frames()), DisplacementField(series.n1(), series.n2()));
  out.ssd_traces.assign(static_cast<std::size_t>(series.frames()), {});

  const Image fixed = frame_image(series, out.reference);
  for (Index f = 0; f < series.frames(); ++f) {
    if (f == out.reference) continue;
    try {
      PairRegistration r = register_pair(fixed, frame_image(series, f), cfg);
      set_frame(out.registered, f, r.warped);
      out.fields[static_cast<std::size_t>(f)] = std::move(r.field);
      out.ssd_traces[static_cast<std::size_t>(f)] = std::move(r.ssd_trace);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (frame " + std::to_string(f) + ")");
    }
  }
  return out;
}

RealSeries recombine(const RealSeries& l_reg, const RealSeries& q) {
  require_same_shape(l_reg, q, "recombine");
  return l_reg + q;
}

std::vector<float> pack_fields(const std::vector<DisplacementField>& fields) {
  if (fields.empty()) return {};
  const Index n1 = fields.front().rows();
  const Index n2 = fields.front().cols();
  const auto t = static_cast<Index>(fields.size());
  std::vector<float> out(static_cast<std::size_t>(n1 * n2 * 2 * t));
  // Frame-contiguous, row-major over [n1, n2, 2] within a frame: components interleave per pixel.
  for (Index f = 0; f < t; ++f) {
    const auto& u = fields[static_cast<std::size_t>(f)];
    if (u.rows() != n1 || u.cols() != n2) throw DimensionError("pack_fields: inconsistent field shapes");
    for (Index c = 0; c < 2; ++c) {
      const Image& comp = c == 0 ? u.dy : u.dx;
      for (Index i = 0; i < n1; ++i)
        for (Index j = 0; j < n2; ++j)
          out[static_cast<std::size_t>(((f * n1 + i) * n2 + j) * 2 + c)] = static_cast<float>(comp(i, j));
    }
  }
  return out;
}

std::vector<DisplacementField> unpack_fields(std::span<const float> values, Index n1, Index n2, Index t) {
  if (static_cast<Index>(values.size()) != n1 * n2 * 2 * t) throw DimensionError("unpack_fields: size mismatch");
  std::vector<DisplacementField> out(static_cast<std::size_t>(t), DisplacementField(n1, n2));
  for (Index f = 0; f < t; ++f)
    for (Index c = 0; c < 2; ++c) {
      Image& comp = c == 0 ? out[static_cast<std::size_t>(f)].dy : out[static_cast<std::size_t>(f)].dx;
      for (Index i = 0; i < n1; ++i)
        for (Index j = 0; j < n2; ++j) comp(i, j) = values[static_cast<std::size_t>(((f * n1 + i) * n2 + j) * 2 + c)];
    }
  return out;
}

void write_registration_csv(const std::filesystem::path& path, const SeriesRegistration& reg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "frame,iter,ssd\n" << std::setprecision(17);
  for (std::size_t f = 0; f < reg.ssd_traces.size(); ++f)
    for (std::size_t k = 0; k < reg.ssd_traces[f].size(); ++k) out << f << ',' << k << ',' << reg.ssd_traces[f][k] << '\n';
}

}  // namespace perfmc
