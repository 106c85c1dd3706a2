#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "search_tracker/image.hpp"

namespace search_tracker {

/// Dense displacement field for one frame interval. +u points right, +v down.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

/// Per-pixel Euclidean norm of a FlowField.
struct MagnitudeField {
  int width = 0;
  int height = 0;
  std::vector<float> mag;

  MagnitudeField() = default;
  MagnitudeField(int w, int h) : width(w), height(h), mag(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int x, int y) const { return mag[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return mag[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const MagnitudeField&, const MagnitudeField&) = default;
};

struct HornSchunckParams {
  double smoothness = 0.1;  // lambda, weight of the smoothness term
  int iterations = 200;
};

/// Classical Horn-Schunck estimate of the motion from `prev` to `next`.
/// Intensities are expected in [0, 1].
FlowField compute_flow(const GrayImage& prev, const GrayImage& next,
                       const HornSchunckParams& params = {});

/// One flow per frame: flow i describes frame i -> i+1. The final frame has no
/// successor and reuses the last computed interval so the count matches the
/// frame count.
std::vector<FlowField> compute_sequence_flow(const FrameSequence& frames,
                                             const HornSchunckParams& params = {});

/// Middlebury .flo reader/writer ("PIEH", LE int32 width/height, LE float32 u,v).
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& field, const std::filesystem::path& path);

/// All *.flo files of a directory in lexicographic order.
std::vector<FlowField> read_flow_dir(const std::filesystem::path& dir);

/// Averages consecutive groups of `step` flows; a trailing partial group is dropped.
std::vector<FlowField> timestep_average(std::span<const FlowField> flows, int step);

MagnitudeField magnitude(const FlowField& field);

/// Mirrors the field; the mirrored component changes sign.
FlowField flip_flow(const FlowField& field, FlipAxis axis);
MagnitudeField flip_magnitude(const MagnitudeField& field, FlipAxis axis);

FlowField crop_flow(const FlowField& field, int x0, int y0, int w, int h);

}  // namespace search_tracker
