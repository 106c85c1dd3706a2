#include "search_tracker/motion_document.hpp"

#include <algorithm>
#include <cmath>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

// Fixed-point scale for vote accumulation.
constexpr double kVoteScale = 4294967296.0;  // 2^32

}  // namespace

std::array<double, kCodeBits> soft_votes(double u, double v) {
  std::array<double, kCodeBits> votes{};
  const double norm = std::hypot(u, v);
  if (norm == 0.0) return votes;
  // Axis unit vectors in image coordinates: up (0,-1), left (-1,0), down (0,1), right (1,0).
  votes[static_cast<int>(Direction::up)] = std::max(0.0, -v / norm);
  votes[static_cast<int>(Direction::left)] = std::max(0.0, -u / norm);
  votes[static_cast<int>(Direction::down)] = std::max(0.0, v / norm);
  votes[static_cast<int>(Direction::right)] = std::max(0.0, u / norm);
  return votes;
}

MotionCode encode_cube(std::span<const FlowVector> vectors, double mag_threshold,
                       double vote_threshold) {
  if (vectors.empty()) throw InvalidArgument("encode_cube needs at least one vector");
  if (!(mag_threshold > 0.0) || !(vote_threshold > 0.0)) {
    throw InvalidArgument("encode_cube thresholds must be positive");
  }
  std::array<long long, kCodeBits> totals{};
  for (const auto& vec : vectors) {
    if (std::hypot(static_cast<double>(vec.u), static_cast<double>(vec.v)) <= mag_threshold) {
      continue;
    }
    const auto votes = soft_votes(vec.u, vec.v);
    for (int d = 0; d < kCodeBits; ++d) totals[d] += std::llround(votes[d] * kVoteScale);
  }
  const double needed = vote_threshold * static_cast<double>(vectors.size()) * kVoteScale;
  MotionCode code;
  for (int d = 0; d < kCodeBits; ++d) code.bits[d] = static_cast<double>(totals[d]) >= needed;
  return code;
}

std::vector<ScaleConfig> multiscale_configs(int width, int height) {
  if (width <= 0 || height <= 0 || width % 4 != 0 || height % 4 != 0) {
    throw GeometryError("frame " + std::to_string(width) + "x" + std::to_string(height) +
                        " cannot be split into a 4x4 grid");
  }
  std::vector<ScaleConfig> configs;
  configs.reserve(kConfigCount);
  int id = 0;
  for (int level : {1, 2, 4}) {
    const int rw = width / level;
    const int rh = height / level;
    for (int row = 0; row < level; ++row) {
      for (int col = 0; col < level; ++col) {
        configs.push_back({id++, level, Region{col * rw, row * rh, rw, rh}});
      }
    }
  }
  return configs;
}

ScaleConfig full_frame_config(int width, int height) {
  return {0, 1, Region{0, 0, width, height}};
}

int word_count(int region_width, int region_height, int cube_width, int cube_height) {
  return region_width * region_height * kCodeBits / (cube_width * cube_height);
}

MotionDocument build_document(std::span<const FlowField> step_flows, const ScaleConfig& config,
                              const DocumentParams& params) {
  const int level = config.level;
  if (level < 1 || params.cube_base % level != 0) {
    throw GeometryError("cube base " + std::to_string(params.cube_base) +
                        " not divisible by level " + std::to_string(level));
  }
  const int cube = params.cube_base / level;
  const Region& r = config.region;
  if (r.width <= 0 || r.height <= 0 || r.width % cube != 0 || r.height % cube != 0) {
    throw GeometryError("region " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                        " not divisible by cube " + std::to_string(cube));
  }

  MotionDocument doc;
  doc.config_id = config.config_id;
  doc.cube_cols = r.width / cube;
  doc.cube_rows = r.height / cube;
  doc.word_count = word_count(r.width, r.height, cube, cube);
  doc.time_steps = static_cast<int>(step_flows.size());

  std::vector<FlowVector> buffer(static_cast<std::size_t>(cube) * cube);
  for (int t = 0; t < doc.time_steps; ++t) {
    const FlowField& flow = step_flows[t];
    if (r.x < 0 || r.y < 0 || r.x + r.width > flow.width || r.y + r.height > flow.height) {
      throw GeometryError("configuration region exceeds the flow field");
    }
    for (int row = 0; row < doc.cube_rows; ++row) {
      for (int col = 0; col < doc.cube_cols; ++col) {
        std::size_t k = 0;
        for (int y = 0; y < cube; ++y) {
          for (int x = 0; x < cube; ++x) {
            const auto i = flow.index(r.x + col * cube + x, r.y + row * cube + y);
            buffer[k++] = {flow.u[i], flow.v[i]};
          }
        }
        const auto code = encode_cube(buffer, params.mag_threshold, params.vote_threshold);
        const auto base = static_cast<std::uint32_t>((row * doc.cube_cols + col) * kCodeBits);
        for (int d = 0; d < kCodeBits; ++d) {
          if (code.bits[d]) {
            doc.activations.push_back({base + static_cast<std::uint32_t>(d),
                                       static_cast<std::uint32_t>(t)});
          }
        }
      }
    }
  }
  std::sort(doc.activations.begin(), doc.activations.end());
  return doc;
}

const char* to_string(FlipVariant flip) {
  switch (flip) {
    case FlipVariant::original:
      return "o";
    case FlipVariant::horizontal:
      return "h";
    case FlipVariant::vertical:
      return "v";
  }
  return "?";
}

std::string to_string(const FragmentId& id) {
  return id.video_id + ":" + std::to_string(id.config_id) + ":" + to_string(id.flip) + ":" +
         std::to_string(id.start_t);
}

std::vector<Fragment> fragmentize(const MotionDocument& doc, int fragment_length,
                                  const std::string& video_id, FlipVariant flip) {
  if (fragment_length < 1) throw InvalidArgument("fragment length must be >= 1");
  std::vector<Fragment> fragments;
  if (doc.time_steps < fragment_length) return fragments;
  const int count = doc.time_steps - fragment_length + 1;
  fragments.resize(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) fragments[s].id = {video_id, doc.config_id, flip, s};
  for (const auto& a : doc.activations) {
    const int t = static_cast<int>(a.time);
    const int first = std::max(0, t - fragment_length + 1);
    const int last = std::min(count - 1, t);
    for (int s = first; s <= last; ++s) {
      fragments[s].activations.push_back({a.word, static_cast<std::uint32_t>(t - s)});
    }
  }
  for (auto& f : fragments) std::sort(f.activations.begin(), f.activations.end());
  return fragments;
}

std::uint32_t mirror_word(std::uint32_t word, int cube_cols, int cube_rows, FlipAxis axis) {
  const int cube_index = static_cast<int>(word) / kCodeBits;
  int dir = static_cast<int>(word) % kCodeBits;
  int row = cube_index / cube_cols;
  int col = cube_index % cube_cols;
  if (axis == FlipAxis::horizontal) {
    col = cube_cols - 1 - col;
    if (dir == static_cast<int>(Direction::left)) {
      dir = static_cast<int>(Direction::right);
    } else if (dir == static_cast<int>(Direction::right)) {
      dir = static_cast<int>(Direction::left);
    }
  } else {
    row = cube_rows - 1 - row;
    if (dir == static_cast<int>(Direction::up)) {
      dir = static_cast<int>(Direction::down);
    } else if (dir == static_cast<int>(Direction::down)) {
      dir = static_cast<int>(Direction::up);
    }
  }
  return static_cast<std::uint32_t>((row * cube_cols + col) * kCodeBits + dir);
}

FrameSequence flip_video(const FrameSequence& video, FlipAxis axis) {
  FrameSequence out = video;
  for (auto& frame : out.frames) frame = flip_image(frame, axis);
  return out;
}

std::vector<FlowField> flip_video(std::span<const FlowField> flows, FlipAxis axis) {
  std::vector<FlowField> out;
  out.reserve(flows.size());
  for (const auto& f : flows) out.push_back(flip_flow(f, axis));
  return out;
}

Track flip_track(const Track& track, FlipAxis axis, int frame_width, int frame_height) {
  Track out = track;
  for (auto& box : out.boxes) box = flip_box(box, axis, frame_width, frame_height);
  return out;
}

Region valid_crop(int width, int height, int cube_base) {
  const int unit = 4 * cube_base;
  const int w = (width / unit) * unit;
  const int h = (height / unit) * unit;
  if (w == 0 || h == 0) {
    throw GeometryError("frame " + std::to_string(width) + "x" + std::to_string(height) +
                        " is smaller than one 4x4 grid of " + std::to_string(cube_base) +
                        " px cubes");
  }
  return {(width - w) / 2, (height - h) / 2, w, h};
}

}  // namespace search_tracker
