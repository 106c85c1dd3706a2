#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace search_tracker {

/// Row-major single-channel raster.
template <typename T>
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Plane&, const Plane&) = default;
};

using GrayImage = Plane<float>;

/// Interleaved 8-bit RGB image.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int x, int y) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct FrameSequence {
  std::string video_id;
  int width = 0;
  int height = 0;
  double fps = 24.0;
  std::vector<RgbImage> frames;
};

enum class FlipAxis { horizontal, vertical };

/// Reads a binary P5 or P6 file; grayscale input is replicated to RGB.
RgbImage read_pnm(const std::filesystem::path& path);
/// Writes a binary P6 file.
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

/// Loads every .pgm/.ppm in `dir` in lexicographic name order.
/// Throws DimensionMismatch on mixed sizes, FormatError on bad files or
/// fewer than two frames.
FrameSequence load_frames(const std::filesystem::path& dir);

/// Luma 0.299R + 0.587G + 0.114B scaled to [0, 1].
GrayImage to_gray(const RgbImage& image);

RgbImage flip_image(const RgbImage& image, FlipAxis axis);

template <typename T>
Plane<T> flip_plane(const Plane<T>& plane, FlipAxis axis) {
  Plane<T> out(plane.width, plane.height);
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      const int sx = axis == FlipAxis::horizontal ? plane.width - 1 - x : x;
      const int sy = axis == FlipAxis::vertical ? plane.height - 1 - y : y;
      out.at(x, y) = plane.at(sx, sy);
    }
  }
  return out;
}

template <typename T>
Plane<T> crop_plane(const Plane<T>& plane, int x0, int y0, int w, int h) {
  Plane<T> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(x, y) = plane.at(x0 + x, y0 + y);
  }
  return out;
}

RgbImage crop_image(const RgbImage& image, int x0, int y0, int w, int h);

}  // namespace search_tracker
