#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "search_tracker/flow.hpp"
#include "search_tracker/geometry.hpp"
#include "search_tracker/image.hpp"

namespace search_tracker {

/// Bit order of a motion code; also the direction index inside a word.
enum class Direction : int { up = 0, left = 1, down = 2, right = 3 };
inline constexpr int kCodeBits = 4;

struct MotionCode {
  std::array<bool, kCodeBits> bits{};  // up, left, down, right

  bool operator[](Direction d) const { return bits[static_cast<int>(d)]; }
  friend bool operator==(const MotionCode&, const MotionCode&) = default;
};

struct FlowVector {
  float u = 0.0f;
  float v = 0.0f;
};

/// Clamped cosine similarity of (u, v) to each axis direction, in code bit order.
/// At most two entries are nonzero.
std::array<double, kCodeBits> soft_votes(double u, double v);

/// Quantizes one cube over one time step. Vectors with magnitude <= mag_threshold
/// are discarded; the rest soft-vote, and a bit is set when its vote total divided
/// by the cube pixel count reaches vote_threshold. Votes are accumulated in fixed
/// point so the result does not depend on vector order.
MotionCode encode_cube(std::span<const FlowVector> vectors, double mag_threshold,
                       double vote_threshold);

struct DocumentParams {
  int cube_base = 20;        // cube edge at full scale, pixels
  int step = 4;              // frames per time step
  int fragment_length = 8;   // T_f, time steps per fragment
  double mag_threshold = 1.0;
  double vote_threshold = 0.10;
};

/// Sub-rectangle of the frame that one configuration encodes.
struct Region {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const Region&, const Region&) = default;
};

/// One of the 21 multi-scale views: level 1 is the full frame, level 2 the
/// quadrants and level 4 the 4x4 grid. Ids are assigned level by level in
/// row-major order.
struct ScaleConfig {
  int config_id = 0;
  int level = 1;
  Region region;

  friend bool operator==(const ScaleConfig&, const ScaleConfig&) = default;
};

inline constexpr int kConfigCount = 21;

std::vector<ScaleConfig> multiscale_configs(int width, int height);
ScaleConfig full_frame_config(int width, int height);

/// Word count W = region_w * region_h * 4 / (cube_w * cube_h).
int word_count(int region_width, int region_height, int cube_width, int cube_height);

/// A (word, time) pair. Inside a fragment `time` is relative to the fragment start.
struct Activation {
  std::uint32_t word = 0;
  std::uint32_t time = 0;

  auto operator<=>(const Activation&) const = default;
};

/// Sorted, duplicate-free activation list.
using ActivationSet = std::vector<Activation>;

struct MotionDocument {
  int word_count = 0;
  int time_steps = 0;
  int config_id = 0;
  int cube_cols = 0;
  int cube_rows = 0;
  ActivationSet activations;
};

/// Encodes per-time-step flows inside `config.region`. Cube edges are
/// cube_base / level so W stays constant across levels. Word index is
/// (row * cols + col) * 4 + direction.
MotionDocument build_document(std::span<const FlowField> step_flows, const ScaleConfig& config,
                              const DocumentParams& params);

enum class FlipVariant : int { original = 0, horizontal = 1, vertical = 2 };
inline constexpr std::array<FlipVariant, 3> kFlipVariants = {
    FlipVariant::original, FlipVariant::horizontal, FlipVariant::vertical};

const char* to_string(FlipVariant flip);

struct FragmentId {
  std::string video_id;
  int config_id = 0;
  FlipVariant flip = FlipVariant::original;
  int start_t = 0;

  auto operator<=>(const FragmentId&) const = default;
};

std::string to_string(const FragmentId& id);

struct Fragment {
  FragmentId id;
  ActivationSet activations;  // times in [0, T_f)
};

/// Every stride-1 window of `fragment_length` steps. Empty windows are kept.
/// Returns nothing when the document is shorter than one window.
std::vector<Fragment> fragmentize(const MotionDocument& doc, int fragment_length,
                                  const std::string& video_id,
                                  FlipVariant flip = FlipVariant::original);

/// Word index a word maps to when the encoded region is mirrored.
std::uint32_t mirror_word(std::uint32_t word, int cube_cols, int cube_rows, FlipAxis axis);

FrameSequence flip_video(const FrameSequence& video, FlipAxis axis);
std::vector<FlowField> flip_video(std::span<const FlowField> flows, FlipAxis axis);
Track flip_track(const Track& track, FlipAxis axis, int frame_width, int frame_height);

/// Largest centered crop whose sides are multiples of 4 * cube_base.
Region valid_crop(int width, int height, int cube_base);

}  // namespace search_tracker
