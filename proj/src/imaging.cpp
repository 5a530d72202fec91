#include "meshforge/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "meshforge/error.hpp"
#include "meshforge/parallel.hpp"

namespace meshforge {

Raster::Raster(int width, int height, double fill)
    : width_(width), height_(height),
      values_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  if (width < 0 || height < 0) throw Error(ErrorKind::InvalidArgument, "negative raster size");
}

void Raster::set_valid(int x, int y, bool v) {
  if (mask_.empty()) {
    if (v) return;
    mask_.assign(values_.size(), 1);
  }
  mask_[index(x, y)] = v ? 1 : 0;
}

std::size_t Raster::valid_count() const {
  if (mask_.empty()) return values_.size();
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

std::optional<double> bilinear_sample(const Raster& r, PixelCoord p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double fx0 = std::floor(p.x);
  const double fy0 = std::floor(p.y);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double tx = p.x - fx0;
  const double ty = p.y - fy0;
  const int x1 = tx > 0.0 ? x0 + 1 : x0;
  const int y1 = ty > 0.0 ? y0 + 1 : y0;
  if (!r.in_bounds(x0, y0) || !r.in_bounds(x1, y1)) return std::nullopt;
  if (!r.valid(x0, y0) || !r.valid(x1, y0) || !r.valid(x0, y1) || !r.valid(x1, y1))
    return std::nullopt;
  const double top = (1.0 - tx) * r.at(x0, y0) + tx * r.at(x1, y0);
  const double bottom = (1.0 - tx) * r.at(x0, y1) + tx * r.at(x1, y1);
  return (1.0 - ty) * top + ty * bottom;
}

std::optional<Eigen::Vector2d> bilinear_gradient(const Raster& r, PixelCoord p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || r.width() < 2 || r.height() < 2)
    return std::nullopt;
  if (p.x < 0.0 || p.y < 0.0 || p.x > r.width() - 1 || p.y > r.height() - 1) return std::nullopt;
  // The cell containing p; the last row and column fall back to the cell before.
  const int x0 = std::min(static_cast<int>(std::floor(p.x)), r.width() - 2);
  const int y0 = std::min(static_cast<int>(std::floor(p.y)), r.height() - 2);
  const double tx = p.x - x0, ty = p.y - y0;
  if (!r.valid(x0, y0) || !r.valid(x0 + 1, y0) || !r.valid(x0, y0 + 1) || !r.valid(x0 + 1, y0 + 1))
    return std::nullopt;
  const double i00 = r.at(x0, y0), i10 = r.at(x0 + 1, y0);
  const double i01 = r.at(x0, y0 + 1), i11 = r.at(x0 + 1, y0 + 1);
  return Eigen::Vector2d((1.0 - ty) * (i10 - i00) + ty * (i11 - i01),
                         (1.0 - tx) * (i01 - i00) + tx * (i11 - i10));
}

ImageGradient image_gradient(const Raster& r) {
  const int w = r.width(), h = r.height();
  ImageGradient g{Raster(w, h), Raster(w, h)};
  auto usable = [&](int x, int y) { return r.in_bounds(x, y) && r.valid(x, y); };
  // Derivative along one axis from whichever neighbors are usable.
  auto diff = [&](int x, int y, int dx, int dy) {
    const bool fwd = usable(x + dx, y + dy);
    const bool bwd = usable(x - dx, y - dy);
    if (fwd && bwd) return 0.5 * (r.at(x + dx, y + dy) - r.at(x - dx, y - dy));
    if (fwd) return r.at(x + dx, y + dy) - r.at(x, y);
    if (bwd) return r.at(x, y) - r.at(x - dx, y - dy);
    return 0.0;
  };
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y)
      for (int x = 0; x < w; ++x) {
        if (!r.valid(x, y)) continue;
        g.dx.at(x, y) = diff(x, y, 1, 0);
        g.dy.at(x, y) = diff(x, y, 0, 1);
      }
  });
  if (r.has_mask())
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (!r.valid(x, y)) {
          g.dx.set_valid(x, y, false);
          g.dy.set_valid(x, y, false);
        }
  return g;
}

Raster downsample(const Raster& r, int levels) {
  if (levels < 0) throw Error(ErrorKind::InvalidArgument, "downsample levels must be >= 0");
  Raster cur = r;
  for (int l = 0; l < levels; ++l) {
    const int w = (cur.width() + 1) / 2;
    const int h = (cur.height() + 1) / 2;
    Raster next(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = 2 * x + dx, sy = 2 * y + dy;
            if (cur.in_bounds(sx, sy) && cur.valid(sx, sy)) {
              sum += cur.at(sx, sy);
              ++n;
            }
          }
        if (n > 0)
          next.at(x, y) = sum / n;
        else
          next.set_valid(x, y, false);
      }
    cur = std::move(next);
  }
  return cur;
}

SimilarityField zncc_field(const Raster& ref, const Raster& reproj, int window) {
  if (ref.width() != reproj.width() || ref.height() != reproj.height())
    throw Error(ErrorKind::InvalidArgument, "zncc_field needs rasters of equal size");
  if (window < 3 || window % 2 == 0)
    throw Error(ErrorKind::InvalidArgument, "zncc window must be odd and >= 3");

  const int w = ref.width(), h = ref.height();
  const int half = window / 2;
  const double n = static_cast<double>(window) * window;

  struct Stats {
    double mean_a, mean_b, inv_sab, zncc_over_vb;  // 1/(N sa sb), ZNCC/(N sb^2)
  };
  std::vector<Stats> stats(static_cast<std::size_t>(w) * h);
  std::vector<std::uint8_t> ok(stats.size(), 0);

  SimilarityField out{Raster(w, h), Raster(w, h)};

  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int cy = static_cast<int>(y0); cy < static_cast<int>(y1); ++cy) {
      if (cy < half || cy >= h - half) continue;
      for (int cx = half; cx < w - half; ++cx) {
        double sa = 0.0, sb = 0.0;
        bool full = true;
        for (int y = cy - half; y <= cy + half && full; ++y)
          for (int x = cx - half; x <= cx + half; ++x) {
            if (!ref.valid(x, y) || !reproj.valid(x, y)) {
              full = false;
              break;
            }
            sa += ref.at(x, y);
            sb += reproj.at(x, y);
          }
        if (!full) continue;
        const double ma = sa / n, mb = sb / n;
        double vaa = 0.0, vbb = 0.0, vab = 0.0;
        for (int y = cy - half; y <= cy + half; ++y)
          for (int x = cx - half; x <= cx + half; ++x) {
            const double da = ref.at(x, y) - ma;
            const double db = reproj.at(x, y) - mb;
            vaa += da * da;
            vbb += db * db;
            vab += da * db;
          }
        const double sig_a = std::sqrt(vaa / n);
        const double sig_b = std::sqrt(vbb / n);
        if (sig_a < 1e-12 || sig_b < 1e-12) continue;
        const double zncc = vab / (n * sig_a * sig_b);
        const std::size_t i = ref.index(cx, cy);
        stats[i] = {ma, mb, 1.0 / (n * sig_a * sig_b), zncc / (n * sig_b * sig_b)};
        ok[i] = 1;
        out.score.at(cx, cy) = -zncc;
      }
    }
  });

  // Gather form of the derivative: each pixel sums the terms of all valid
  // windows that contain it.
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int ky = static_cast<int>(y0); ky < static_cast<int>(y1); ++ky)
      for (int kx = 0; kx < w; ++kx) {
        double acc = 0.0;
        const double a = ref.at(kx, ky), b = reproj.at(kx, ky);
        for (int cy = std::max(ky - half, 0); cy <= std::min(ky + half, h - 1); ++cy)
          for (int cx = std::max(kx - half, 0); cx <= std::min(kx + half, w - 1); ++cx) {
            const std::size_t i = ref.index(cx, cy);
            if (!ok[i]) continue;
            const Stats& s = stats[i];
            acc -= (a - s.mean_a) * s.inv_sab - (b - s.mean_b) * s.zncc_over_vb;
          }
        out.d2m.at(kx, ky) = acc;
      }
  });

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!ok[ref.index(x, y)]) out.score.set_valid(x, y, false);
  return out;
}

}  // namespace meshforge
