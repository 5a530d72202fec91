#pragma once

#include <cstddef>
#include <vector>

#include "meshforge/mesh.hpp"

namespace meshforge::eval {

struct MetricsReport {
  double completeness_pct = 0.0;
  double rmse_trunc_m = 0.0;
  bool rmse_defined = false;  // false when no residual is below the truncation
  double nmad_m = 0.0;
  double perc68_m = 0.0;
  std::size_t n_total = 0;  // evaluation cells (mask-selected, or the whole grid)
  std::size_t n_valid = 0;  // of those, cells with both heights present
  double truncation_m = 3.0;
  double vertical_offset_applied_m = 0.0;
};

struct Alignment {
  DemGrid aligned;
  double offset_m = 0.0;
};

/// Median of the values; the mean of the two middle values for even counts.
double median(std::vector<double> values);
/// Nearest-rank percentile, p in (0, 100].
double percentile_nearest_rank(std::vector<double> values, double p);

/// Removes the median height difference over co-valid cells. Throws
/// InsufficientOverlap below 10 such cells.
Alignment align_vertical(const DemGrid& test, const DemGrid& truth);

/// Residual statistics of test - truth over co-valid cells selected by the
/// optional mask (finite, nonzero mask cells). Throws EmptyEvaluation if no
/// cell qualifies.
MetricsReport compute_metrics(const DemGrid& test, const DemGrid& truth, const DemGrid* mask = nullptr,
                              double truncation_m = 3.0);

/// Aligned residual grid (test - truth), missing where either is missing.
DemGrid residual_grid(const DemGrid& test, const DemGrid& truth);

}  // namespace meshforge::eval
