#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "search_tracker/annotations.hpp"
#include "search_tracker/flow.hpp"
#include "search_tracker/geometry.hpp"
#include "search_tracker/motion_document.hpp"

namespace search_tracker {

/// A library video ready for indexing: one flow per frame.
struct LibraryVideo {
  std::string video_id;
  int width = 0;
  int height = 0;
  std::vector<FlowField> frame_flows;
};

struct VideoInfo {
  std::string video_id;
  int width = 0;
  int height = 0;
  int frame_count = 0;
  int time_steps = 0;

  friend bool operator==(const VideoInfo&, const VideoInfo&) = default;
};

/// Tracks are stored per flip variant, since mirrored boxes differ.
struct TrackKey {
  std::string video_id;
  FlipVariant flip = FlipVariant::original;
  std::string track_id;

  auto operator<=>(const TrackKey&) const = default;
};

struct FlowKey {
  std::string video_id;
  FlipVariant flip = FlipVariant::original;
  int time_step = 0;

  auto operator<=>(const FlowKey&) const = default;
};

/// The five library tables. Fragments are kept sorted by id so a fragment's
/// position doubles as its lexicographic rank; inverse postings and the track
/// inverse table refer to fragments by that position.
struct LibraryIndex {
  DocumentParams params;
  int cube_cols = 0;
  int cube_rows = 0;
  int word_count = 0;
  std::vector<VideoInfo> videos;  // sorted by id

  std::vector<Fragment> fragments;                                // fragment forward
  std::map<Activation, std::vector<std::uint32_t>> inverse;       // fragment inverse
  std::map<FlowKey, MagnitudeField> flow_fields;                  // per-time-step magnitudes
  std::map<TrackKey, Track> tracks;                               // track forward
  std::vector<std::vector<TrackKey>> track_inverse;               // parallel to `fragments`

  const VideoInfo* find_video(const std::string& video_id) const;
  /// Position of `id` in `fragments`, or -1.
  long find_fragment(const FragmentId& id) const;
  const MagnitudeField* flow_at(const std::string& video_id, FlipVariant flip, int frame) const;
};

/// Builds all five tables from full-scale documents of each video and its
/// horizontal and vertical mirrors. A fragment is linked to every track whose
/// span intersects frames [start_t * step, (start_t + T_f) * step).
/// Throws ReferenceError for annotations that name unknown videos or frames.
LibraryIndex build_library(std::span<const LibraryVideo> videos,
                           const std::vector<AnnotationRow>& annotations,
                           const DocumentParams& params, bool include_flips = true);

/// Recomputes `inverse` from `fragments`.
void rebuild_inverse(LibraryIndex& index);

inline constexpr int kIndexFormatVersion = 1;

/// Writes manifest.json plus one binary file per table into `dir`.
void save_index(const LibraryIndex& index, const std::filesystem::path& dir);
LibraryIndex load_index(const std::filesystem::path& dir);

/// Keeps ceil(gamma * videos) videos picked by a seeded shuffle and filters
/// every table to them.
LibraryIndex sample_sublibrary(const LibraryIndex& index, double gamma, std::uint64_t seed);

/// Transpose and referential-integrity scan. Returns human-readable problems;
/// empty when the index is consistent.
std::vector<std::string> verify_index(const LibraryIndex& index);

bool operator==(const LibraryIndex& a, const LibraryIndex& b);

}  // namespace search_tracker
