#include "perfmc/periodicity.hpp"

#include <fstream>
#include <numeric>

#include "json.hpp"

namespace perfmc {

PeriodicProjector::PeriodicProjector(Index period, Index length) : period_(period), length_(length) {
  if (length < 1) throw ConfigError("periodic projector: length must be >= 1");
  if (period < 1 || period > length)
    throw ConfigError("periodic projector: period " + std::to_string(period) + " outside [1, " + std::to_string(length) +
                      "]");
}

void PeriodicProjector::apply(std::span<const double> row, std::span<double> out) const {
  if (static_cast<Index>(row.size()) != length_ || out.size() != row.size())
    throw DimensionError("periodic projector: sequence length mismatch");
  for (Index r = 0; r < period_; ++r) {
    double sum = 0.0;
    Index count = 0;
    for (Index n = r; n < length_; n += period_) {
      sum += row[static_cast<std::size_t>(n)];
      ++count;
    }
    const double mean = sum / static_cast<double>(count);
    for (Index n = r; n < length_; n += period_) out[static_cast<std::size_t>(n)] = mean;
  }
}

std::vector<double> PeriodicProjector::apply(std::span<const double> row) const {
  std::vector<double> out(row.size());
  apply(row, out);
  return out;
}

double PeriodicProjector::energy(std::span<const double> row) const {
  if (static_cast<Index>(row.size()) != length_) throw DimensionError("periodic projector: sequence length mismatch");
  double e = 0.0;
  for (Index r = 0; r < period_; ++r) {
    double sum = 0.0;
    Index count = 0;
    for (Index n = r; n < length_; n += period_) {
      sum += row[static_cast<std::size_t>(n)];
      ++count;
    }
    // count copies of the class mean
    e += sum * sum / static_cast<double>(count);
  }
  return e;
}

std::vector<double> project_periodic(std::span<const double> row, Index period) {
  return PeriodicProjector(period, static_cast<Index>(row.size())).apply(row);
}

namespace {

double squared_norm(std::span<const double> x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); }

// The constant component lies in every candidate subspace and would bias the
// per-period score toward p = 2. Scores are therefore computed on mean-free
// sequences and the mean joins the periodic part with the first pick.
double remove_mean(std::span<double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (auto& v : x) v -= mean;
  return mean;
}

void check_args(int m, double min_energy_frac) {
  if (m < 1) throw ConfigError("m-best split: m must be >= 1");
  if (!(min_energy_frac >= 0.0 && min_energy_frac < 1.0))
    throw ConfigError("m-best split: min_energy_frac must be in [0, 1)");
}

}  // namespace

RowSplit m_best_split(std::span<const double> row, int m, double min_energy_frac) {
  check_args(m, min_energy_frac);
  const auto t = static_cast<Index>(row.size());
  RowSplit out;
  out.periodic.assign(row.size(), 0.0);
  out.residual.assign(row.begin(), row.end());
  const double total = squared_norm(row);
  if (t < 4 || total == 0.0) return out;

  const double mean = remove_mean(out.residual);
  std::vector<double> proj(row.size());
  for (int pick = 0; pick < m; ++pick) {
    Index best = 0;
    double best_score = -1.0;
    double best_energy = 0.0;
    for (Index p = 2; p <= t / 2; ++p) {
      const double e = PeriodicProjector(p, t).energy(out.residual);
      const double score = e / static_cast<double>(p);
      if (score > best_score) {
        best_score = score;
        best = p;
        best_energy = e;
      }
    }
    if (best_energy < min_energy_frac * total || best_energy <= 0.0) break;
    PeriodicProjector(best, t).apply(out.residual, proj);
    const double offset = out.periods.empty() ? mean : 0.0;
    for (std::size_t n = 0; n < proj.size(); ++n) {
      out.periodic[n] += proj[n] + offset;
      out.residual[n] -= proj[n];
    }
    out.periods.push_back({best, best_energy, best_energy / total});
  }
  // Exact additive split: residual is defined from the accumulated periodic part.
  for (std::size_t n = 0; n < row.size(); ++n) out.residual[n] = row[n] - out.periodic[n];
  return out;
}

PeriodicSplit split_sparse_component(const RealSeries& s, int m, double min_energy_frac) {
  check_args(m, min_energy_frac);
  const Index t = s.frames();
  if (t < 4) throw ConfigError("split_sparse_component: series too short (t = " + std::to_string(t) + ", need >= 4)");

  const Index rows = s.pixels();
  // Time courses of each pixel, contiguous per pixel.
  std::vector<double> residual(static_cast<std::size_t>(rows * t));
  const auto cas = s.casorati();
  for (Index p = 0; p < rows; ++p)
    for (Index f = 0; f < t; ++f) residual[static_cast<std::size_t>(p * t + f)] = cas(p, f);
  std::vector<double> periodic(residual.size(), 0.0);
  const double total = squared_norm(residual);
  const auto row_of = [&](std::vector<double>& buf, Index p) {
    return std::span<double>(buf).subspan(static_cast<std::size_t>(p * t), static_cast<std::size_t>(t));
  };

  PeriodicSplit out;
  if (total > 0.0) {
    std::vector<double> means(static_cast<std::size_t>(rows));
    for (Index p = 0; p < rows; ++p) means[static_cast<std::size_t>(p)] = remove_mean(row_of(residual, p));
    std::vector<double> proj(static_cast<std::size_t>(t));
    for (int pick = 0; pick < m; ++pick) {
      Index best = 0;
      double best_score = -1.0;
      double best_energy = 0.0;
      for (Index cand = 2; cand <= t / 2; ++cand) {
        const PeriodicProjector projector(cand, t);
        double e = 0.0;
        for (Index p = 0; p < rows; ++p) e += projector.energy(row_of(residual, p));
        const double score = e / static_cast<double>(cand);
        if (score > best_score) {
          best_score = score;
          best = cand;
          best_energy = e;
        }
      }
      if (best_energy < min_energy_frac * total || best_energy <= 0.0) break;
      const PeriodicProjector projector(best, t);
      for (Index p = 0; p < rows; ++p) {
        auto r = row_of(residual, p);
        auto acc = row_of(periodic, p);
        projector.apply(r, proj);
        const double offset = out.periods.empty() ? means[static_cast<std::size_t>(p)] : 0.0;
        for (Index f = 0; f < t; ++f) {
          acc[static_cast<std::size_t>(f)] += proj[static_cast<std::size_t>(f)] + offset;
          r[static_cast<std::size_t>(f)] -= proj[static_cast<std::size_t>(f)];
        }
      }
      out.periods.push_back({best, best_energy, best_energy / total});
    }
  }

  out.P = RealSeries(s.shape());
  out.P.pixel_spacing = s.pixel_spacing;
  out.P.frame_interval = s.frame_interval;
  auto pc = out.P.casorati();
  for (Index p = 0; p < rows; ++p)
    for (Index f = 0; f < t; ++f) pc(p, f) = periodic[static_cast<std::size_t>(p * t + f)];
  out.Q = s - out.P;
  return out;
}

RealSeries periodic_component(const RealSeries& s, Index period) {
  const Index t = s.frames();
  const PeriodicProjector projector(period, t);
  RealSeries out(s.shape());
  out.pixel_spacing = s.pixel_spacing;
  out.frame_interval = s.frame_interval;
  const auto cas = s.casorati();
  auto oc = out.casorati();
  std::vector<double> row(static_cast<std::size_t>(t)), proj(static_cast<std::size_t>(t));
  for (Index p = 0; p < s.pixels(); ++p) {
    for (Index f = 0; f < t; ++f) row[static_cast<std::size_t>(f)] = cas(p, f);
    remove_mean(row);
    projector.apply(row, proj);
    for (Index f = 0; f < t; ++f) oc(p, f) = proj[static_cast<std::size_t>(f)];
  }
  return out;
}

void write_periods_json(const std::filesystem::path& path, const std::vector<PeriodEnergy>& periods) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : periods)
    j.push_back({{"period", p.period}, {"energy", p.energy}, {"energy_fraction", p.energy_fraction}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

}  // namespace perfmc
