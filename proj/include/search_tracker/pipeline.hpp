#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "search_tracker/annotation_transfer.hpp"
#include "search_tracker/annotations.hpp"
#include "search_tracker/association.hpp"
#include "search_tracker/flow.hpp"
#include "search_tracker/image.hpp"
#include "search_tracker/library_index.hpp"
#include "search_tracker/metrics.hpp"
#include "search_tracker/motion_document.hpp"
#include "search_tracker/retrieval.hpp"

namespace search_tracker {

/// Every tunable of the tracker. Defaults reproduce the reference settings.
struct RunConfig {
  DocumentParams document;
  HornSchunckParams flow;
  RetrievalParams retrieval;
  WarpParams warp;
  NmsParams nms;
  AssociationParams association;
  double min_coverage = 0.9;     // compositions covering less of their query fragment transfer no boxes
  double min_match_score = 0.5;  // compositions scoring lower transfer no boxes
  int smoothing_half_window = 2;
  double overlap_threshold = kOverlapThreshold;
  double distance_threshold = kDistanceThreshold;
  bool include_flips = true;
  std::uint64_t seed = 0;  // base seed for warping and sub-library sampling

  void validate() const;
};

/// Reads a flat JSON object; absent keys keep their defaults, unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);

/// Frames plus per-frame flows, both cropped to the cube grid.
struct PreparedVideo {
  FrameSequence frames;
  std::vector<FlowField> flows;
  Region crop;  // region of the original frame that was kept
};

/// Crops to the largest centered region that tiles into 4x4 cubes and computes
/// Horn-Schunck flow when `flows` is empty.
PreparedVideo prepare_video(const FrameSequence& frames, std::vector<FlowField> flows,
                            const RunConfig& config);

/// Loads a directory of frames; flows come from `flow_dir` when it is non-empty.
PreparedVideo load_video(const std::filesystem::path& frame_dir, const std::filesystem::path& flow_dir,
                         const RunConfig& config);

/// Builds the index from video directories under `videos_dir` (one subdirectory
/// per video; *.flo files inside a video directory are used instead of
/// Horn-Schunck). Annotation boxes are shifted into the cropped frame.
LibraryIndex build_library_from_dir(const std::filesystem::path& videos_dir,
                                    const std::vector<AnnotationRow>& annotations, const RunConfig& config);

LibraryIndex build_library_from_videos(const std::vector<PreparedVideo>& videos,
                                       const std::vector<AnnotationRow>& annotations, const RunConfig& config);

struct TrackingStats {
  std::size_t matches = 0;     // retrieved query fragments over all configurations
  std::size_t candidates = 0;  // distinct transferred boxes
  std::size_t kept = 0;        // boxes surviving NMS
};

struct TrackingResult {
  std::vector<Track> tracks;  // original (uncropped) query coordinates
  TrackingStats stats;
};

TrackingResult track_query(const PreparedVideo& query, const LibraryIndex& index, const RunConfig& config);

enum class EvalMode { single, clear };

struct EvalSummary {
  double overlap_precision = 0.0;
  double distance_precision = 0.0;
  double mean_voc = 0.0;
  double mean_cle = 0.0;  // NaN when no frame had a hypothesis box
  double mota = 0.0;
  double motp = 0.0;
};

/// Scores every GT video against the hypotheses of the same video and writes
/// the JSON report. Single mode also writes overlap_precision.csv and
/// distance_precision.csv next to the report. The summary averages over videos.
EvalSummary evaluate_videos(const std::map<std::string, std::vector<Track>>& gt,
                            const std::map<std::string, std::vector<Track>>& hyps, EvalMode mode,
                            const RunConfig& config, const std::filesystem::path& report_path);

struct SweepRow {
  double value = 0.0;
  double overlap_precision = 0.0;
  double distance_precision = 0.0;
};

enum class SweepParam { gamma, alpha };

/// Tracks the query once per value: sub-sampled index for gamma, overridden
/// warp alpha for alpha. Scores are single-target precisions against `gt`.
std::vector<SweepRow> run_sweep(SweepParam param, std::span<const double> values, const LibraryIndex& index,
                                const PreparedVideo& query, const std::vector<Track>& gt,
                                const RunConfig& config);

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

}  // namespace search_tracker
