#pragma once

#include <string>
#include <vector>

#include "search_tracker/geometry.hpp"

namespace search_tracker {

/// Per-frame comparison of one GT track against one hypothesis track.
struct SingleTargetScores {
  std::vector<int> frames;
  std::vector<double> ious;  // 0 where the hypothesis has no box
  std::vector<double> cles;  // +inf where the hypothesis has no box
  double mean_voc = 0.0;
  double mean_cle = 0.0;     // over frames with a hypothesis box; NaN if none

  /// Fraction of frames with IoU >= threshold.
  double overlap_precision(double threshold) const;
  /// Fraction of frames with CLE <= threshold; missing frames always fail.
  double distance_precision(double threshold) const;
};

/// Scores `hyp` over the GT span. Throws EmptyOverlap when the spans are disjoint.
SingleTargetScores single_target_scores(const Track& gt, const Track& hyp);

/// Picks the hypothesis that overlaps (IoU > 0) the GT on the most frames;
/// ties go to the larger summed IoU, then to the earlier track. -1 if none overlaps.
int select_hypothesis(const Track& gt, const std::vector<Track>& hyps);

inline constexpr double kOverlapThreshold = 0.5;
inline constexpr double kDistanceThreshold = 20.0;

struct SequenceScores {
  std::vector<std::string> gt_ids;
  std::vector<std::string> hyp_ids;  // selected hypothesis per GT, "" if none
  double mean_voc = 0.0;             // averaged over GT tracks
  double mean_cle = 0.0;             // averaged over GT tracks with a defined CLE; NaN if none
  std::vector<double> overlap_thresholds;
  std::vector<double> overlap_precision;
  std::vector<double> distance_thresholds;
  std::vector<double> distance_precision;

  double overlap_precision_at(double threshold) const;
  double distance_precision_at(double threshold) const;
};

/// Single-target evaluation of every GT track against its selected hypothesis.
/// A GT track without any overlapping hypothesis scores zero on every frame.
SequenceScores evaluate_single_target(const std::vector<Track>& gt, const std::vector<Track>& hyps);

struct FrameMatch {
  std::string gt_id;
  std::string hyp_id;
  double iou = 0.0;
  double center_error = 0.0;
};

struct FrameEval {
  int frame = 0;
  std::vector<FrameMatch> matches;
  int misses = 0;
  int false_positives = 0;
  int id_switches = 0;
};

struct ClearMotResult {
  double mota = 0.0;
  double motp = 0.0;  // 100 * mean IoU of matched pairs; 0 without matches
  int gt_total = 0;
  int matches = 0;
  int misses = 0;
  int false_positives = 0;
  int id_switches = 0;
  std::vector<FrameEval> frames;
};

/// CLEAR MOT with IoU >= match_threshold as the match gate. Continuing
/// correspondences are kept while valid; the rest are assigned by Hungarian
/// matching on 1 - IoU. Throws UndefinedMetric when there are no GT boxes.
ClearMotResult clear_mot(const std::vector<Track>& gt, const std::vector<Track>& hyps,
                         double match_threshold = kOverlapThreshold);

}  // namespace search_tracker
