#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "perfmc/periodicity.hpp"
#include "perfmc/phantom.hpp"
#include "support.hpp"

using namespace perfmc;

namespace {

std::vector<double> random_row(Index t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> x(static_cast<std::size_t>(t));
  for (auto& v : x) v = g(rng);
  return x;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> minus(std::span<const double> a, std::span<const double> b) {
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

double max_abs(std::span<const double> a) {
  double m = 0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Block-of-identities C_p (t x t): entry (n, n') = 1 when n = n' (mod p),
// rows normalized by their residue-class size.
Eigen::MatrixXd explicit_cp(Index p, Index t) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(t, t);
  for (Index n = 0; n < t; ++n)
    for (Index k = 0; k < t; ++k)
      if (n % p == k % p) c(n, k) = 1.0;
  for (Index n = 0; n < t; ++n) c.row(n) /= c.row(n).sum();
  return c;
}

std::vector<double> sine(Index t, double period) {
  std::vector<double> x(static_cast<std::size_t>(t));
  for (Index n = 0; n < t; ++n) x[static_cast<std::size_t>(n)] = std::sin(2 * std::numbers::pi * n / period);
  return x;
}

}  // namespace

TEST(Projector, PeriodOneIsTheMean) {
  auto x = random_row(13, 1);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / 13.0;
  for (double v : project_periodic(x, 1)) EXPECT_NEAR(v, mean, 1e-14);
}

TEST(Projector, ResidueClassMeans) {
  std::vector<double> x(12);
  std::iota(x.begin(), x.end(), 1.0);
  const std::vector<double> expected{5, 6, 7, 8, 5, 6, 7, 8, 5, 6, 7, 8};
  auto y = project_periodic(x, 4);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(y[i], expected[i]);
}

TEST(Projector, NonDividingPeriodUsesTrueClassSizes) {
  std::vector<double> x(10);
  std::iota(x.begin(), x.end(), 0.0);
  // classes {0,4,8} {1,5,9} {2,6} {3,7}
  const std::vector<double> expected{4, 5, 4, 5, 4, 5, 4, 5, 4, 5};
  auto y = project_periodic(x, 4);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(y[i], expected[i]);
}

TEST(Projector, PeriodicRowIsFixed) {
  std::vector<double> x(24);
  for (std::size_t i = 0; i < 24; ++i) x[i] = std::cos(0.7 * static_cast<double>(i % 6)) + 0.1 * (i % 6);
  EXPECT_LE(max_abs(minus(project_periodic(x, 6), x)), 1e-12);
}

TEST(Projector, RejectsBadPeriods) {
  std::vector<double> x(8, 1.0);
  EXPECT_THROW(project_periodic(x, 0), ConfigError);
  EXPECT_THROW(project_periodic(x, 9), ConfigError);
  EXPECT_NO_THROW(project_periodic(x, 8));
}

TEST(Projector, EnergyMatchesProjection) {
  auto x = random_row(30, 2);
  for (Index p = 1; p <= 30; ++p) {
    auto y = project_periodic(x, p);
    EXPECT_NEAR(PeriodicProjector(p, 30).energy(x), dot(y, y), 1e-10);
  }
}

TEST(ProjectorProperties, IdempotentOrthogonalEnergySplit) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index t = 24;
    auto x = random_row(t, seed);
    const double xx = dot(x, x);
    for (Index p = 1; p <= t; ++p) {
      auto y = project_periodic(x, p);
      EXPECT_LE(max_abs(minus(project_periodic(y, p), y)), 1e-12);
      if (t % p != 0) continue;
      auto r = minus(x, y);
      EXPECT_LE(std::abs(dot(r, y)), 1e-8 * xx);
      EXPECT_NEAR(dot(y, y) + dot(r, r), xx, 1e-8 * xx);
    }
  }
}

TEST(ProjectorProperties, EqualsExplicitBlockMatrix) {
  for (Index t = 2; t <= 16; ++t) {
    auto x = random_row(t, static_cast<std::uint64_t>(t));
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), t);
    for (Index p = 1; p <= t; ++p) {
      const Eigen::VectorXd expected = explicit_cp(p, t) * xv;
      auto y = project_periodic(x, p);
      for (Index n = 0; n < t; ++n) ASSERT_NEAR(y[static_cast<std::size_t>(n)], expected(n), 1e-12) << t << " " << p;
    }
  }
}

TEST(MBest, PureSineIsFoundExactly) {
  auto x = sine(32, 8);
  auto s = m_best_split(x, 1, 0.05);
  ASSERT_EQ(s.periods.size(), 1u);
  EXPECT_EQ(s.periods[0].period, 8);
  EXPECT_LE(std::sqrt(dot(s.residual, s.residual)), 1e-10);
}

TEST(MBest, PeriodicRowWithOffsetLeavesNoResidual) {
  auto x = sine(30, 5);
  for (auto& v : x) v += 2.5;
  auto s = m_best_split(x, 3, 0.05);
  ASSERT_FALSE(s.periods.empty());
  EXPECT_EQ(s.periods[0].period, 5);
  EXPECT_LE(max_abs(s.residual), 1e-10);
}

TEST(MBest, SineUnderBolusCurve) {
  const Index t = 32;
  auto wave = sine(t, 8);
  BolusCurve bolus{0.0, 1.0, 6.0, 3.0, 1.5};  // peak equal to the sine amplitude
  std::vector<double> x(static_cast<std::size_t>(t));
  for (Index n = 0; n < t; ++n) x[static_cast<std::size_t>(n)] = wave[static_cast<std::size_t>(n)] + bolus.at(n);
  auto s = m_best_split(x, 2, 0.02);
  ASSERT_FALSE(s.periods.empty());
  EXPECT_EQ(s.periods[0].period, 8);
  // correlation of the mean-free periodic part with the sinusoid
  auto pc = s.periodic;
  const double mean = std::accumulate(pc.begin(), pc.end(), 0.0) / static_cast<double>(t);
  for (auto& v : pc) v -= mean;
  const double r = dot(pc, wave) / std::sqrt(dot(pc, pc) * dot(wave, wave));
  EXPECT_GE(r, 0.95);
}

TEST(MBest, WhiteNoiseExtractsOnlySmallFractions) {
  // A period-p projection of white noise keeps p/t of the energy on average and
  // the per-period score ties p = 2 with p = t/2, so single picks can be large.
  // Frozen regression values for these 100 rows: mean 0.25, worst 0.678.
  double worst = 0, sum = 0;
  int picks = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto x = random_row(32, 1000 + seed);
    auto s = m_best_split(x, 3, 0.0);
    for (const auto& pe : s.periods) {
      worst = std::max(worst, pe.energy_fraction);
      sum += pe.energy_fraction;
      ++picks;
    }
  }
  EXPECT_LT(sum / picks, 0.3);
  EXPECT_LE(worst, 0.70);
}

TEST(MBest, SplitIsExactAndPeriodsInRange) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto x = random_row(32, seed);
    for (Index n = 0; n < 32; ++n) x[static_cast<std::size_t>(n)] += 2 * std::sin(2 * std::numbers::pi * n / 4.0);
    auto s = m_best_split(x, 3, 0.01);
    for (std::size_t n = 0; n < x.size(); ++n) ASSERT_NEAR(s.periodic[n] + s.residual[n], x[n], 1e-14 * (1 + std::abs(x[n])));
    double removed = 0;
    for (const auto& pe : s.periods) removed += pe.energy;
    EXPECT_LE(removed, std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    for (const auto& pe : s.periods) {
      EXPECT_GE(pe.period, 2);
      EXPECT_LE(pe.period, 16);
    }
  }
}

TEST(MBest, CompositePeriodNeedsEveryPick) {
  // Period 2 scores first, then the rest of the period-10 pattern.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<double> pattern(10), x(30);
  for (auto& v : pattern) v = g(rng);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = 1.5 + pattern[n % 10];
  const auto s = m_best_split(x, 3, 1e-3);
  ASSERT_EQ(s.periods.size(), 3u);
  for (double v : s.residual) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(MBest, ArgumentChecks) {
  std::vector<double> x(8, 1.0);
  EXPECT_THROW(m_best_split(x, 0, 0.05), ConfigError);
  EXPECT_THROW(m_best_split(x, 1, 1.0), ConfigError);
  EXPECT_THROW(m_best_split(x, 1, -0.1), ConfigError);
}

TEST(SparseSplit, ZeroInZeroOut) {
  auto s = split_sparse_component(RealSeries({4, 4, 8}), 3, 0.05);
  EXPECT_EQ(s.P.casorati().norm(), 0.0);
  EXPECT_EQ(s.Q.casorati().norm(), 0.0);
  EXPECT_TRUE(s.periods.empty());
}

TEST(SparseSplit, TooShortThrows) { EXPECT_THROW(split_sparse_component(RealSeries({4, 4, 3}), 3, 0.05), ConfigError); }

TEST(SparseSplit, ExactAdditiveSplitAndSharedPeriods) {
  const Shape shape{8, 8, 30};
  auto s = perfmc::test::random_real(shape, 3);
  auto c = s.casorati();
  for (Index p = 0; p < shape.pixels(); ++p)
    for (Index f = 0; f < shape.t; ++f) c(p, f) += 3.0 * std::sin(2 * std::numbers::pi * f / 5.0 + 0.1 * p);
  auto split = split_sparse_component(s, 3, 0.05);
  ASSERT_FALSE(split.periods.empty());
  EXPECT_EQ(split.periods[0].period, 5);
  EXPECT_LE((split.P.casorati() + split.Q.casorati() - c).cwiseAbs().maxCoeff(), 1e-10);
  for (std::size_t k = 1; k < split.periods.size(); ++k)
    EXPECT_LE(split.periods[k].energy, split.periods[k - 1].energy);
}

TEST(SparseSplit, MatchesRowwiseMBestForOneRow) {
  const Shape shape{2, 1, 32};
  RealSeries s(shape);
  auto row = random_row(32, 5);
  for (Index f = 0; f < 32; ++f) {
    row[static_cast<std::size_t>(f)] += std::cos(2 * std::numbers::pi * f / 8.0);
    s(0, 0, f) = row[static_cast<std::size_t>(f)];
    s(1, 0, f) = row[static_cast<std::size_t>(f)];
  }
  auto split = split_sparse_component(s, 2, 0.05);
  auto single = m_best_split(row, 2, 0.05);
  ASSERT_EQ(split.periods.size(), single.periods.size());
  for (Index f = 0; f < 32; ++f) EXPECT_NEAR(split.P(0, 0, f), single.periodic[static_cast<std::size_t>(f)], 1e-12);
}

TEST(SparseSplit, PhantomMotionHasPeriodFive) {
  // Oracle sparse component: the moving noiseless scene minus its temporal mean.
  auto spec = PhantomSpec::desk();
  spec.snr = std::numeric_limits<double>::infinity();
  auto ph = generate_phantom(spec);
  RealSeries s = real_part(ph.truth.clean);
  const Eigen::VectorXd mean = s.casorati().rowwise().mean();
  s.casorati().colwise() -= mean;
  auto split = split_sparse_component(s, 3, 0.05);
  ASSERT_FALSE(split.periods.empty());
  EXPECT_EQ(split.periods[0].period, 5);
}

TEST(SparseSplit, PeriodsJson) {
  auto dir = perfmc::test::scratch_dir("periods");
  write_periods_json(dir / "periods.json", {{5, 2.0, 0.5}, {13, 0.5, 0.125}});
  auto j = nlohmann::json::parse(std::ifstream(dir / "periods.json"));
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["period"], 5);
  EXPECT_EQ(j[1]["energy_fraction"], 0.125);
}
