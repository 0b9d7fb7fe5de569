#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "perfmc/array.hpp"

namespace perfmc {

/// Orthogonal projection onto p-periodic sequences of length t (the averaging
/// form of the block-identity matrix C_p): each output sample is the mean of
/// all input samples in its residue class mod p. When p does not divide t the
/// classes average over their actual member counts.
class PeriodicProjector {
 public:
  PeriodicProjector(Index period, Index length);

  Index period() const { return period_; }
  Index length() const { return length_; }

  std::vector<double> apply(std::span<const double> row) const;
  void apply(std::span<const double> row, std::span<double> out) const;
  /// ||apply(row)||^2 without materializing the projection.
  double energy(std::span<const double> row) const;

 private:
  Index period_;
  Index length_;
};

std::vector<double> project_periodic(std::span<const double> row, Index period);

struct PeriodEnergy {
  Index period = 0;
  double energy = 0.0;           // ||projection||^2 removed at this step
  double energy_fraction = 0.0;  // energy / ||input||^2
};

struct RowSplit {
  std::vector<double> periodic;
  std::vector<double> residual;
  std::vector<PeriodEnergy> periods;
};

/// Greedy m-best periodicity transform of one sequence.
///
/// The search residual starts as the row minus its mean. Repeats up to m times:
/// among candidate periods 2..floor(t/2) pick the one maximizing
/// ||projection(residual)||^2 / p, stop if its energy is below
/// min_energy_frac * ||row||^2, otherwise subtract the projection and record it. The row mean, which is p-periodic for
/// every p, is added to the periodic part with the first pick; with no pick the
/// periodic part is zero. periodic + residual == row.
RowSplit m_best_split(std::span<const double> row, int m, double min_energy_frac);

struct PeriodicSplit {
  RealSeries P;  // periodic part (respiration)
  RealSeries Q;  // aperiodic residual (contrast)
  std::vector<PeriodEnergy> periods;
};

/// Row-wise split of the sparse component with one shared set of periods.
/// Candidates are scored by the projection energy summed over all mean-free
/// pixel rows of the Casorati matrix; the m best global periods are then removed
/// from every row, with the row means going to P as in m_best_split. P + Q == s.
PeriodicSplit split_sparse_component(const RealSeries& s, int m, double min_energy_frac);

/// Projection of every mean-free pixel row onto p-periodic sequences; for the
/// first period picked by split_sparse_component this is its contribution to P
/// without the row means.
RealSeries periodic_component(const RealSeries& s, Index period);

/// `periods.json`: ordered list of {period, energy, energy_fraction}.
void write_periods_json(const std::filesystem::path& path, const std::vector<PeriodEnergy>& periods);

}  // namespace perfmc
