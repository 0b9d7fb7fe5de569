#include "perfmc/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "json.hpp"

namespace perfmc {

namespace {

template <typename T>
double rmse_impl(const Series<T>& x, const Series<T>& reference) {
  require_same_shape(x, reference, "rmse");
  if (reference.size() == 0) throw DimensionError("rmse: empty series");
  const double peak = reference.casorati().cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw ConfigError("rmse: reference is identically zero");
  const double mse = (x.casorati() - reference.casorati()).cwiseAbs2().sum() / static_cast<double>(x.size());
  return std::sqrt(mse) / peak;
}

}  // namespace

double rmse(const ComplexSeries& x, const ComplexSeries& reference) { return rmse_impl(x, reference); }
double rmse(const RealSeries& x, const RealSeries& reference) { return rmse_impl(x, reference); }

void SectorDefinition::validate() const {
  if (!(inner_radius > 0.0) || !(outer_radius > inner_radius))
    throw ConfigError("sector definition: need outer_radius > inner_radius > 0");
  if (septum_mid == lv_center) throw ConfigError("sector definition: septum_mid coincides with lv_center");
}

std::array<Index, 6> SectorLabels::counts() const {
  std::array<Index, 6> c{};
  for (auto l : labels)
    if (l >= 1 && l <= 6) ++c[l - 1];
  return c;
}

double clockwise_angle(const SectorDefinition& def, double row, double col) {
  const double sr = def.septum_mid[0] - def.lv_center[0];
  const double sc = def.septum_mid[1] - def.lv_center[1];
  const double vr = row - def.lv_center[0];
  const double vc = col - def.lv_center[1];
  // With rows pointing down, a positive cross term is a clockwise turn on screen.
  const double cross = sc * vr - sr * vc;
  const double dot = sr * vr + sc * vc;
  double phi = std::atan2(cross, dot);
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  if (phi >= 2.0 * std::numbers::pi) phi = 0.0;
  return phi;
}

SectorLabels segment_sectors(const SectorDefinition& def, Index n1, Index n2) {
  def.validate();
  const auto& c = def.lv_center;
  if (c[0] - def.outer_radius < 0.0 || c[1] - def.outer_radius < 0.0 ||
      c[0] + def.outer_radius > static_cast<double>(n1 - 1) || c[1] + def.outer_radius > static_cast<double>(n2 - 1))
    throw ConfigError("sector definition: annulus extends beyond the image");

  SectorLabels out{n1, n2, std::vector<std::uint8_t>(static_cast<std::size_t>(n1 * n2), 0)};
  const double sector = std::numbers::pi / 3.0;
  for (Index i = 0; i < n1; ++i) {
    for (Index j = 0; j < n2; ++j) {
      const double r = std::hypot(static_cast<double>(i) - c[0], static_cast<double>(j) - c[1]);
      if (r < def.inner_radius || r > def.outer_radius) continue;
      const double phi = clockwise_angle(def, static_cast<double>(i), static_cast<double>(j));
      const int k = std::min(5, static_cast<int>(std::floor(phi / sector)));
      out.labels[static_cast<std::size_t>(i * n2 + j)] = static_cast<std::uint8_t>(k + 1);
    }
  }
  return out;
}

namespace {

template <typename T, typename ToReal>
TimeIntensityCurves curves_impl(const Series<T>& series, const SectorDefinition& def, ToReal to_real) {
  const SectorLabels labels = segment_sectors(def, series.n1(), series.n2());
  TimeIntensityCurves out;
  out.sector_pixel_counts = labels.counts();
  for (int s = 0; s < 6; ++s)
    if (out.sector_pixel_counts[static_cast<std::size_t>(s)] == 0)
      throw ConfigError("extract_curves: sector " + std::to_string(s + 1) + " is empty");
  out.values = Eigen::MatrixXd::Zero(6, series.frames());
  for (Index f = 0; f < series.frames(); ++f) {
    const auto fr = series.frame(f);
    for (std::size_t p = 0; p < fr.size(); ++p) {
      const auto l = labels.labels[p];
      if (l != 0) out.values(l - 1, f) += to_real(fr[p]);
    }
  }
  for (int s = 0; s < 6; ++s) out.values.row(s) /= static_cast<double>(out.sector_pixel_counts[static_cast<std::size_t>(s)]);
  return out;
}

}  // namespace

TimeIntensityCurves extract_curves(const RealSeries& series, const SectorDefinition& def) {
  return curves_impl(series, def, [](double v) { return v; });
}

TimeIntensityCurves extract_curves(const ComplexSeries& series, const SectorDefinition& def) {
  return curves_impl(series, def, [](const cplx& v) { return std::abs(v); });
}

double curve_rmse(const TimeIntensityCurves& curves, const TimeIntensityCurves& reference) {
  if (curves.values.rows() != reference.values.rows() || curves.values.cols() != reference.values.cols())
    throw DimensionError("curve_rmse: curve sets differ in shape");
  const double peak = reference.values.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw ConfigError("curve_rmse: reference curves are identically zero");
  return std::sqrt((curves.values - reference.values).squaredNorm() / static_cast<double>(curves.values.size())) / peak;
}

ResidualMotion residual_motion(const RealSeries& series, const MotionRoi& roi, Index reference_frame) {
  if (reference_frame < 0 || reference_frame >= series.frames()) throw ConfigError("residual_motion: bad reference frame");
  if (!(roi.radius > 0.0)) throw ConfigError("residual_motion: ROI radius must be > 0");
  ResidualMotion out;
  for (Index f = 0; f < series.frames(); ++f) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < series.n1(); ++i)
      for (Index j = 0; j < series.n2(); ++j)
        if (std::hypot(static_cast<double>(i) - roi.center[0], static_cast<double>(j) - roi.center[1]) <= roi.radius)
          peak = std::max(peak, series(i, j, f));
    const double threshold = 0.5 * peak;
    double sr = 0.0, sc = 0.0;
    Index count = 0;
    for (Index i = 0; i < series.n1(); ++i)
      for (Index j = 0; j < series.n2(); ++j)
        if (std::hypot(static_cast<double>(i) - roi.center[0], static_cast<double>(j) - roi.center[1]) <= roi.radius &&
            series(i, j, f) >= threshold) {
          sr += static_cast<double>(i);
          sc += static_cast<double>(j);
          ++count;
        }
    if (count == 0 || !(peak > 0.0))
      throw NumericalError("residual_motion: no pixel above threshold in frame " + std::to_string(f));
    out.centroids.push_back({sr / static_cast<double>(count), sc / static_cast<double>(count)});
  }
  const Point ref = out.centroids[static_cast<std::size_t>(reference_frame)];
  double sum = 0.0;
  for (const auto& c : out.centroids) {
    const double d = std::hypot(c[0] - ref[0], c[1] - ref[1]);
    sum += d;
    out.max_px = std::max(out.max_px, d);
  }
  out.mean_px = sum / static_cast<double>(out.centroids.size());
  return out;
}

void write_curves_csv(const std::filesystem::path& path, const TimeIntensityCurves& curves) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "frame,sector1,sector2,sector3,sector4,sector5,sector6\n" << std::setprecision(17);
  for (Index f = 0; f < curves.frames(); ++f) {
    out << f;
    for (Index s = 0; s < 6; ++s) out << ',' << curves.values(s, f);
    out << '\n';
  }
}

SectorDefinition read_sectors_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": not valid JSON (" + e.what() + ")");
  }
  SectorDefinition def;
  try {
    def.lv_center = j.at("lv_center").get<Point>();
    def.septum_mid = j.at("septum_mid").get<Point>();
    def.inner_radius = j.at("inner_radius").get<double>();
    def.outer_radius = j.at("outer_radius").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  for (const auto& [key, value] : j.items())
    if (key != "lv_center" && key != "septum_mid" && key != "inner_radius" && key != "outer_radius")
      throw FormatError(path.string() + ": unknown field '" + key + "'");
  def.validate();
  return def;
}

void write_sectors_json(const std::filesystem::path& path, const SectorDefinition& def) {
  const nlohmann::json j = {{"lv_center", def.lv_center},
                            {"septum_mid", def.septum_mid},
                            {"inner_radius", def.inner_radius},
                            {"outer_radius", def.outer_radius}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace perfmc
