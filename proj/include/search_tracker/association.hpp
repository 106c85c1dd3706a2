#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "search_tracker/geometry.hpp"
#include "search_tracker/image.hpp"

namespace search_tracker {

inline constexpr int kHueBins = 10;
inline constexpr int kSaturationBins = 5;

/// Joint hue/saturation histogram, bin index hue_bin * 5 + saturation_bin.
/// Normalized to sum 1, or all zero for an empty box.
struct HsvHistogram {
  std::array<double, kHueBins * kSaturationBins> bins{};

  double at(int hue_bin, int saturation_bin) const { return bins[hue_bin * kSaturationBins + saturation_bin]; }
};

HsvHistogram hsv_histogram(const RgbImage& frame, const BoundingBox& box);

/// 1 - histogram intersection.
double histogram_distance(const HsvHistogram& a, const HsvHistogram& b);

struct AssociationParams {
  double beta = 2.5;            // weight of the center distance
  double gate_distance = 50.0;  // pairs farther apart than this are never linked
};

/// J = d_hist + beta * ||c_a - c_b||.
double association_cost(const HsvHistogram& hist_a, const BoundingBox& a, const HsvHistogram& hist_b,
                        const BoundingBox& b, const AssociationParams& params);
double association_cost(const RgbImage& frame_a, const BoundingBox& a, const RgbImage& frame_b,
                        const BoundingBox& b, const AssociationParams& params);

/// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs (Kuhn-Munkres
/// with potentials). Rectangular inputs are padded to square with 10x the
/// largest cost; padded pairs are not reported.
Assignment hungarian_assign(const CostMatrix& costs);

/// Frame-by-frame Hungarian linking. `detections[f]` are the boxes kept on frame
/// f; `frames` supplies the images for the appearance term (may be empty, in
/// which case only geometry is used). Track ids are "0", "1", ... in creation
/// order.
std::vector<Track> link_tracks(std::span<const std::vector<BoundingBox>> detections,
                               std::span<const RgbImage> frames, const AssociationParams& params);

/// Moving average of center and size over [t - k, t + k] clipped to the track.
/// Boxes are clamped to the frame when frame sizes are positive.
std::vector<Track> smooth_tracks(const std::vector<Track>& tracks, int half_window, int frame_width = 0,
                                 int frame_height = 0);

}  // namespace search_tracker
