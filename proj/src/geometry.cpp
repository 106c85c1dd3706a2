#include "search_tracker/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace search_tracker {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const long long w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const long long h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (w <= 0 || h <= 0) return 0.0;
  const long long inter = w * h;
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double cle(const BoundingBox& a, const BoundingBox& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

BoundingBox flip_box(const BoundingBox& box, FlipAxis axis, int frame_width, int frame_height) {
  if (axis == FlipAxis::horizontal) {
    return {frame_width - box.right, box.top, frame_width - box.left, box.bottom};
  }
  return {box.left, frame_height - box.bottom, box.right, frame_height - box.top};
}

BoundingBox clamp_box(const BoundingBox& box, int frame_width, int frame_height) {
  return {std::clamp(box.left, 0, frame_width), std::clamp(box.top, 0, frame_height),
          std::clamp(box.right, 0, frame_width), std::clamp(box.bottom, 0, frame_height)};
}

}  // namespace search_tracker
