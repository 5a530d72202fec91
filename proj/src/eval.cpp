#include "meshforge/eval.hpp"

#include <algorithm>
#include <cmath>

#include "meshforge/error.hpp"

namespace meshforge::eval {
namespace {

void require_same_grid(const DemGrid& a, const DemGrid& b) {
  if (a.cols != b.cols || a.rows != b.rows || a.cell_size != b.cell_size ||
      a.origin_x != b.origin_x || a.origin_y != b.origin_y)
    throw Error(ErrorKind::InvalidArgument, "grids are not co-registered");
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorKind::EmptyEvaluation, "median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

double percentile_nearest_rank(std::vector<double> v, double p) {
  if (v.empty()) throw Error(ErrorKind::EmptyEvaluation, "percentile of an empty set");
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

Alignment align_vertical(const DemGrid& test, const DemGrid& truth) {
  require_same_grid(test, truth);
  std::vector<double> diff;
  for (std::size_t i = 0; i < test.heights.size(); ++i)
    if (std::isfinite(test.heights[i]) && std::isfinite(truth.heights[i]))
      diff.push_back(test.heights[i] - truth.heights[i]);
  if (diff.size() < 10)
    throw Error(ErrorKind::InsufficientOverlap,
                "only " + std::to_string(diff.size()) + " co-valid cells");
  Alignment out{test, median(std::move(diff))};
  for (double& h : out.aligned.heights)
    if (std::isfinite(h)) h -= out.offset_m;
  return out;
}

MetricsReport compute_metrics(const DemGrid& test, const DemGrid& truth, const DemGrid* mask,
                              double truncation_m) {
  require_same_grid(test, truth);
  if (mask) require_same_grid(test, *mask);
  MetricsReport rep;
  rep.truncation_m = truncation_m;
  std::vector<double> residuals;
  for (std::size_t i = 0; i < test.heights.size(); ++i) {
    if (mask && !(std::isfinite(mask->heights[i]) && mask->heights[i] != 0.0)) continue;
    ++rep.n_total;
    if (std::isfinite(test.heights[i]) && std::isfinite(truth.heights[i]))
      residuals.push_back(test.heights[i] - truth.heights[i]);
  }
  rep.n_valid = residuals.size();
  if (residuals.empty()) throw Error(ErrorKind::EmptyEvaluation, "no co-valid evaluation cell");

  double sum_sq = 0.0;
  std::size_t within = 0;
  std::vector<double> abs_res;
  abs_res.reserve(residuals.size());
  for (double r : residuals) {
    abs_res.push_back(std::abs(r));
    if (std::abs(r) < truncation_m) {
      sum_sq += r * r;
      ++within;
    }
  }
  rep.completeness_pct = 100.0 * static_cast<double>(within) / static_cast<double>(rep.n_valid);
  rep.rmse_defined = within > 0;
  rep.rmse_trunc_m = within > 0 ? std::sqrt(sum_sq / static_cast<double>(within)) : 0.0;

  const double med = median(residuals);
  std::vector<double> dev;
  dev.reserve(residuals.size());
  for (double r : residuals) dev.push_back(std::abs(r - med));
  rep.nmad_m = 1.4826 * median(std::move(dev));
  rep.perc68_m = percentile_nearest_rank(std::move(abs_res), 68.0);
  return rep;
}

DemGrid residual_grid(const DemGrid& test, const DemGrid& truth) {
  require_same_grid(test, truth);
  DemGrid out = truth.empty_like();
  for (std::size_t i = 0; i < out.heights.size(); ++i)
    if (std::isfinite(test.heights[i]) && std::isfinite(truth.heights[i]))
      out.heights[i] = test.heights[i] - truth.heights[i];
  return out;
}

}  // namespace meshforge::eval
