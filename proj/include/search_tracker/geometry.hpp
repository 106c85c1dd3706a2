#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "search_tracker/image.hpp"

namespace search_tracker {

/// Axis-aligned box in pixels, left/top inclusive and right/bottom exclusive.
struct BoundingBox {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  int width() const { return right - left; }
  int height() const { return bottom - top; }
  long long area() const { return static_cast<long long>(width()) * height(); }
  double center_x() const { return 0.5 * (left + right); }
  double center_y() const { return 0.5 * (top + bottom); }
  bool valid() const { return left < right && top < bottom; }
  bool inside(int frame_width, int frame_height) const {
    return valid() && left >= 0 && top >= 0 && right <= frame_width && bottom <= frame_height;
  }

  auto operator<=>(const BoundingBox&) const = default;
};

/// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Center location error: Euclidean distance between box centers.
double cle(const BoundingBox& a, const BoundingBox& b);

BoundingBox flip_box(const BoundingBox& box, FlipAxis axis, int frame_width, int frame_height);

/// Clamps a box to the frame; the result may be invalid if the box lies outside.
BoundingBox clamp_box(const BoundingBox& box, int frame_width, int frame_height);

/// An identity with one box per frame over a contiguous frame range.
struct Track {
  std::string track_id;
  int first_frame = 0;
  std::vector<BoundingBox> boxes;

  int last_frame() const { return first_frame + static_cast<int>(boxes.size()) - 1; }
  bool empty() const { return boxes.empty(); }
  bool covers(int frame) const { return frame >= first_frame && frame <= last_frame(); }
  std::optional<BoundingBox> box_at(int frame) const {
    if (!covers(frame)) return std::nullopt;
    return boxes[static_cast<std::size_t>(frame - first_frame)];
  }

  friend bool operator==(const Track&, const Track&) = default;
};

}  // namespace search_tracker
