#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "search_tracker/annotations.hpp"
#include "search_tracker/flow.hpp"
#include "search_tracker/image.hpp"

namespace search_tracker {

/// A textured rectangle translating by an integer velocity every frame.
struct SyntheticObject {
  std::string track_id;
  int width = 40;
  int height = 40;
  int x0 = 0;  // top-left corner on frame 0
  int y0 = 0;
  int vx = 0;  // pixels per frame
  int vy = 0;
  std::uint8_t hue = 0;  // tint of the object texture, 0..255 around the color wheel
};

struct SyntheticScene {
  std::string video_id = "synthetic";
  int width = 320;
  int height = 240;
  int frames = 100;
  std::uint64_t seed = 0;
  int annotation_margin = 0;  // padding between the object and its GT box
  std::vector<SyntheticObject> objects;  // later objects are drawn on top
};

struct SyntheticVideo {
  FrameSequence frames;
  std::vector<FlowField> flows;  // exact motion from frame i to i + 1
  std::vector<AnnotationRow> annotations;
};

SyntheticVideo render_scene(const SyntheticScene& scene);

/// Preset scenes: "moving_square", "two_movers", "occlusion".
SyntheticScene named_scenario(const std::string& name, std::uint64_t seed);

/// Writes frame_NNNNN.ppm, flow_NNNNN.flo and annotations.csv into `dir`.
void write_synthetic(const SyntheticVideo& video, const std::filesystem::path& dir);

}  // namespace search_tracker
