#include "perfmc/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"
#include "perfmc/fourier.hpp"
#include "perfmc/registration.hpp"
#include "perfmc/sampling.hpp"

namespace perfmc {

bool Ellipse::contains(double row, double col) const {
  const double a = (row - center[0]) / semi_row;
  const double b = (col - center[1]) / semi_col;
  return a * a + b * b <= 1.0;
}

bool Ellipse::inside(const Ellipse& outer) const {
  for (int k = 0; k < 360; ++k) {
    const double th = 2.0 * std::numbers::pi * k / 360.0;
    if (!outer.contains(center[0] + semi_row * std::sin(th), center[1] + semi_col * std::cos(th))) return false;
  }
  return true;
}

double BolusCurve::at(double frame) const {
  const double s = (frame - arrival) / (shape_k * scale_theta);
  if (s <= 0.0) return baseline;
  return baseline + amplitude * std::pow(s, shape_k) * std::exp(shape_k * (1.0 - s));
}

namespace {

void check_ellipse(const Ellipse& e, const char* name) {
  if (!(e.semi_row > 0.0) || !(e.semi_col > 0.0))
    throw ConfigError(std::string("phantom: ") + name + " semi-axes must be > 0");
}

void check_bolus(const BolusCurve& b, const char* name) {
  if (!(b.shape_k > 0.0) || !(b.scale_theta > 0.0) || b.baseline < 0.0 || b.amplitude < 0.0)
    throw ConfigError(std::string("phantom: ") + name + " bolus needs k, theta > 0 and non-negative intensities");
}

PhantomSpec scaled_scene(Shape shape) {
  // Reference geometry on a 64x64 grid, scaled isotropically and centred.
  const double s = std::min(shape.n1, shape.n2) / 64.0;
  const Point c{(shape.n1 - 1) / 2.0, (shape.n2 - 1) / 2.0};
  auto at = [&](double dr, double dc) { return Point{c[0] + s * dr, c[1] + s * dc}; };

  PhantomSpec p;
  p.shape = shape;
  p.body = {at(0.0, 0.0), 28.0 * s, 26.0 * s};
  p.rv = {at(-0.5, -10.5), 9.0 * s, 5.0 * s};
  p.myocardium = {at(-0.5, 6.5), 10.0 * s, 10.0 * s};
  p.lv_pool = {at(-0.5, 6.5), 6.0 * s, 6.0 * s};
  p.body_intensity = 0.05;
  p.rv_bolus = {0.30, 0.9, 3.0, 3.0, 1.5};
  p.lv_bolus = {0.30, 0.8, 7.0, 3.0, 1.5};
  p.myo_bolus = {0.12, 0.25, 9.0, 3.0, 1.5};
  p.respiration = {3.0 * s, 5, 0};
  return p;
}

// Fraction of the pixel area covered by the ellipse, by supersampling.
Eigen::ArrayXXd coverage(const Ellipse& e, Index n1, Index n2, int ss) {
  Eigen::ArrayXXd cov = Eigen::ArrayXXd::Zero(n1, n2);
  const double w = 1.0 / (ss * ss);
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      double acc = 0.0;
      for (int a = 0; a < ss; ++a)
        for (int b = 0; b < ss; ++b)
          if (e.contains(i + (a + 0.5) / ss - 0.5, j + (b + 0.5) / ss - 0.5)) acc += w;
      cov(i, j) = acc;
    }
  return cov;
}

}  // namespace

void PhantomSpec::validate() const {
  if (shape.n1 < 8 || shape.n2 < 8 || shape.t < 4) throw ConfigError("phantom: shape too small " + to_string(shape));
  if (!(pixel_mm[0] > 0.0) || !(pixel_mm[1] > 0.0)) throw ConfigError("phantom: pixel size must be > 0");
  check_ellipse(body, "body");
  check_ellipse(rv, "rv");
  check_ellipse(myocardium, "myocardium");
  check_ellipse(lv_pool, "lv_pool");
  if (!lv_pool.inside(myocardium)) throw ConfigError("phantom: LV pool is not nested inside the myocardium");
  if (!myocardium.inside(body) || !rv.inside(body)) throw ConfigError("phantom: RV and myocardium must lie inside the body");
  if (body_intensity < 0.0) throw ConfigError("phantom: body intensity must be >= 0");
  check_bolus(rv_bolus, "rv");
  check_bolus(lv_bolus, "lv");
  check_bolus(myo_bolus, "myocardium");
  if (respiration.amplitude_px < 0.0) throw ConfigError("phantom: respiration amplitude must be >= 0");
  if (respiration.period_frames < 3 || respiration.period_frames > shape.t / 2)
    throw ConfigError("phantom: respiration period must lie in [3, t/2]");
  if (respiration.axis != 0 && respiration.axis != 1) throw ConfigError("phantom: respiration axis must be 0 or 1");
  if (!(snr > 0.0)) throw ConfigError("phantom: snr must be > 0");
  if (supersample < 1 || supersample > 16) throw ConfigError("phantom: supersample must be in [1, 16]");
  const double margin = respiration.amplitude_px;
  const double half_r = (respiration.axis == 0 ? margin : 0.0) + body.semi_row;
  const double half_c = (respiration.axis == 1 ? margin : 0.0) + body.semi_col;
  if (body.center[0] - half_r < 0.0 || body.center[0] + half_r > shape.n1 - 1.0 || body.center[1] - half_c < 0.0 ||
      body.center[1] + half_c > shape.n2 - 1.0)
    throw ConfigError("phantom: body leaves the field of view during respiration");
}

PhantomSpec PhantomSpec::desk() { return scaled_scene({64, 64, 32}); }
PhantomSpec PhantomSpec::paper() { return scaled_scene({224, 192, 32}); }

SectorDefinition PhantomSpec::sectors() const {
  SectorDefinition def;
  def.lv_center = lv_pool.center;
  const double inner = std::max(lv_pool.semi_row, lv_pool.semi_col);
  const double outer = std::min(myocardium.semi_row, myocardium.semi_col);
  def.inner_radius = inner + 1.0;
  def.outer_radius = outer - 1.0;
  // Septum midpoint on the line toward the RV centre, halfway through the wall.
  const double dr = rv.center[0] - lv_pool.center[0];
  const double dc = rv.center[1] - lv_pool.center[1];
  const double len = std::hypot(dr, dc);
  const double mid = 0.5 * (inner + outer);
  def.septum_mid = {lv_pool.center[0] + mid * dr / len, lv_pool.center[1] + mid * dc / len};
  return def;
}

MotionRoi PhantomSpec::lv_roi() const {
  return {lv_pool.center, std::max(lv_pool.semi_row, lv_pool.semi_col) + respiration.amplitude_px + 1.0};
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Shape shape = spec.shape;
  const Index n1 = shape.n1, n2 = shape.n2, t = shape.t;

  const Eigen::ArrayXXd c_body = coverage(spec.body, n1, n2, spec.supersample);
  const Eigen::ArrayXXd c_rv = coverage(spec.rv, n1, n2, spec.supersample);
  const Eigen::ArrayXXd c_myo = coverage(spec.myocardium, n1, n2, spec.supersample);
  const Eigen::ArrayXXd c_pool = coverage(spec.lv_pool, n1, n2, spec.supersample);

  PhantomTruth truth;
  truth.compartment_curves.resize(3, t);
  truth.static_clean = RealSeries(shape);
  truth.static_clean.pixel_spacing = spec.pixel_mm;
  for (Index f = 0; f < t; ++f) {
    const double rv = spec.rv_bolus.at(static_cast<double>(f));
    const double lv = spec.lv_bolus.at(static_cast<double>(f));
    const double myo = spec.myo_bolus.at(static_cast<double>(f));
    truth.compartment_curves.col(f) << rv, lv, myo;
    Eigen::ArrayXXd img = spec.body_intensity * c_body;
    img = img * (1.0 - c_rv) + rv * c_rv;
    img = img * (1.0 - c_myo) + myo * c_myo;
    img = img * (1.0 - c_pool) + lv * c_pool;
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j) truth.static_clean(i, j, f) = img(i, j);
  }

  RealSeries moved(shape);
  moved.pixel_spacing = spec.pixel_mm;
  for (Index f = 0; f < t; ++f) {
    const double d = spec.respiration.amplitude_px *
                     std::sin(2.0 * std::numbers::pi * static_cast<double>(f % spec.respiration.period_frames) /
                              static_cast<double>(spec.respiration.period_frames));
    const Point step = spec.respiration.axis == 0 ? Point{d, 0.0} : Point{0.0, d};
    truth.trajectory.push_back(step);
    // Scene translated by +d: out(x) = scene(x - d).
    DisplacementField u(n1, n2);
    u.dy.setConstant(-step[0]);
    u.dx.setConstant(-step[1]);
    set_frame(moved, f, warp(frame_image(truth.static_clean, f), u));
  }
  truth.clean = to_complex(moved);
  truth.sectors = spec.sectors();
  truth.sector_curves = extract_curves(truth.static_clean, truth.sectors);

  Phantom out;
  out.noisy = truth.clean;
  if (std::isfinite(spec.snr)) {
    const double mean_signal = truth.clean.casorati().cwiseAbs().mean();
    truth.noise_sigma = mean_signal / spec.snr;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, truth.noise_sigma / std::numbers::sqrt2);
    for (auto& v : out.noisy.data()) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += cplx(re, im);
    }
  }
  out.truth = std::move(truth);
  return out;
}

KSpaceData undersample_phantom(const ComplexSeries& series, double rate, std::uint64_t seed) {
  if (rate != 1.0 && rate != 2.0 && rate != 4.0 && rate != 8.0 && rate != 12.0)
    throw ConfigError("undersample_phantom: unsupported rate " + std::to_string(rate) + " (expected 1, 2, 4, 8 or 12)");
  const SamplingMask mask = rate == 1.0 ? full_mask(series.shape()) : variable_density_mask(series.shape(), rate, seed);
  return forward_undersample(series, mask);
}

namespace {

nlohmann::json ellipse_json(const Ellipse& e) {
  return {{"center", e.center}, {"semi_row", e.semi_row}, {"semi_col", e.semi_col}};
}

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

void write_truth_json(const std::filesystem::path& path, const PhantomSpec& spec, const PhantomTruth& truth) {
  nlohmann::json j;
  j["shape"] = {spec.shape.n1, spec.shape.n2, spec.shape.t};
  j["pixel_mm"] = spec.pixel_mm;
  j["slice_mm"] = spec.slice_mm;
  j["geometry"] = {{"body", ellipse_json(spec.body)},
                   {"rv", ellipse_json(spec.rv)},
                   {"myocardium", ellipse_json(spec.myocardium)},
                   {"lv_pool", ellipse_json(spec.lv_pool)}};
  j["respiration"] = {{"amplitude_px", spec.respiration.amplitude_px},
                      {"period_frames", spec.respiration.period_frames},
                      {"axis", spec.respiration.axis}};
  j["snr"] = std::isfinite(spec.snr) ? nlohmann::json(spec.snr) : nlohmann::json(nullptr);
  j["noise_sigma"] = truth.noise_sigma;
  j["seed"] = spec.seed;
  j["trajectory"] = truth.trajectory;
  const auto& cc = truth.compartment_curves;
  j["compartment_curves"] = {{"rv_pool", matrix_rows(cc.row(0))[0]},
                             {"lv_pool", matrix_rows(cc.row(1))[0]},
                             {"myocardium", matrix_rows(cc.row(2))[0]}};
  j["sectors"] = {{"lv_center", truth.sectors.lv_center},
                  {"septum_mid", truth.sectors.septum_mid},
                  {"inner_radius", truth.sectors.inner_radius},
                  {"outer_radius", truth.sectors.outer_radius}};
  j["sector_curves"] = matrix_rows(truth.sector_curves.values);
  j["sector_pixel_counts"] = truth.sector_curves.sector_pixel_counts;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace perfmc
