#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "meshforge/rfm.hpp"

namespace meshforge {

/// Row-major single-channel image of doubles with an optional validity mask.
/// Pixel (x, y) has its center at integer coordinates.
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(int x, int y) { return values_[index(x, y)]; }
  double at(int x, int y) const { return values_[index(x, y)]; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool valid(int x, int y) const { return mask_.empty() || mask_[index(x, y)] != 0; }
  void set_valid(int x, int y, bool v);
  bool has_mask() const { return !mask_.empty(); }
  std::size_t valid_count() const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Bilinear interpolation; empty if any contributing neighbor is masked or
/// outside the raster.
std::optional<double> bilinear_sample(const Raster& r, PixelCoord p);

/// Exact derivative of the bilinear interpolant at p (one-sided on cell
/// borders); empty under the same conditions as bilinear_sample.
std::optional<Eigen::Vector2d> bilinear_gradient(const Raster& r, PixelCoord p);

struct ImageGradient {
  Raster dx;
  Raster dy;
};

/// Central differences in the interior, one-sided at borders and next to
/// masked pixels.
ImageGradient image_gradient(const Raster& r);

/// Repeated 2×2 box-filter halving; output dimensions ceil(dim / 2) per level.
Raster downsample(const Raster& r, int levels);

/// Negative ZNCC score per window center plus the derivative of the summed
/// score with respect to every pixel of the second image.
struct SimilarityField {
  Raster score;  // -ZNCC, valid only where both windows are fully valid
  Raster d2m;
};

SimilarityField zncc_field(const Raster& ref, const Raster& reproj, int window);

}  // namespace meshforge
