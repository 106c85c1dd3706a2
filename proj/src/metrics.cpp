#include "search_tracker/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "search_tracker/association.hpp"
#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

std::vector<double> overlap_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  return grid;
}

std::vector<double> distance_grid() {
  std::vector<double> grid;
  for (int d = 0; d <= 50; ++d) grid.push_back(d);
  return grid;
}

double value_at(const std::vector<double>& grid, const std::vector<double>& values, double threshold) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - threshold) < 1e-9) return values[i];
  }
  throw InvalidArgument("threshold not on the precision grid");
}

}  // namespace

double SingleTargetScores::overlap_precision(double threshold) const {
  if (ious.empty()) return 0.0;
  const auto n = std::count_if(ious.begin(), ious.end(), [&](double v) { return v >= threshold; });
  return static_cast<double>(n) / static_cast<double>(ious.size());
}

double SingleTargetScores::distance_precision(double threshold) const {
  if (cles.empty()) return 0.0;
  const auto n = std::count_if(cles.begin(), cles.end(), [&](double v) { return v <= threshold; });
  return static_cast<double>(n) / static_cast<double>(cles.size());
}

SingleTargetScores single_target_scores(const Track& gt, const Track& hyp) {
  if (gt.empty() || hyp.empty() || hyp.last_frame() < gt.first_frame || hyp.first_frame > gt.last_frame()) {
    throw EmptyOverlap("hypothesis " + hyp.track_id + " does not overlap GT " + gt.track_id);
  }
  SingleTargetScores s;
  double voc_sum = 0.0, cle_sum = 0.0;
  int cle_count = 0;
  for (int f = gt.first_frame; f <= gt.last_frame(); ++f) {
    const auto g = *gt.box_at(f);
    s.frames.push_back(f);
    if (auto h = hyp.box_at(f)) {
      s.ious.push_back(iou(g, *h));
      s.cles.push_back(cle(g, *h));
      cle_sum += s.cles.back();
      ++cle_count;
    } else {
      s.ious.push_back(0.0);
      s.cles.push_back(std::numeric_limits<double>::infinity());
    }
    voc_sum += s.ious.back();
  }
  s.mean_voc = voc_sum / static_cast<double>(s.ious.size());
  s.mean_cle = cle_count > 0 ? cle_sum / cle_count : std::numeric_limits<double>::quiet_NaN();
  return s;
}

int select_hypothesis(const Track& gt, const std::vector<Track>& hyps) {
  int best = -1;
  int best_count = 0;
  double best_sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    int count = 0;
    double sum = 0.0;
    for (int f = gt.first_frame; f <= gt.last_frame(); ++f) {
      if (auto h = hyps[i].box_at(f)) {
        const double v = iou(*gt.box_at(f), *h);
        if (v > 0.0) {
          ++count;
          sum += v;
        }
      }
    }
    if (count > 0 && (count > best_count || (count == best_count && sum > best_sum))) {
      best = static_cast<int>(i);
      best_count = count;
      best_sum = sum;
    }
  }
  return best;
}

double SequenceScores::overlap_precision_at(double threshold) const {
  return value_at(overlap_thresholds, overlap_precision, threshold);
}

double SequenceScores::distance_precision_at(double threshold) const {
  return value_at(distance_thresholds, distance_precision, threshold);
}

SequenceScores evaluate_single_target(const std::vector<Track>& gt, const std::vector<Track>& hyps) {
  SequenceScores out;
  out.overlap_thresholds = overlap_grid();
  out.distance_thresholds = distance_grid();
  out.overlap_precision.assign(out.overlap_thresholds.size(), 0.0);
  out.distance_precision.assign(out.distance_thresholds.size(), 0.0);
  if (gt.empty()) return out;

  double cle_sum = 0.0;
  int cle_tracks = 0;
  for (const auto& g : gt) {
    out.gt_ids.push_back(g.track_id);
    const int pick = select_hypothesis(g, hyps);
    if (pick < 0) {
      out.hyp_ids.emplace_back();
      continue;
    }
    out.hyp_ids.push_back(hyps[pick].track_id);
    const auto s = single_target_scores(g, hyps[pick]);
    out.mean_voc += s.mean_voc;
    if (!std::isnan(s.mean_cle)) {
      cle_sum += s.mean_cle;
      ++cle_tracks;
    }
    for (std::size_t i = 0; i < out.overlap_thresholds.size(); ++i) {
      out.overlap_precision[i] += s.overlap_precision(out.overlap_thresholds[i]);
    }
    for (std::size_t i = 0; i < out.distance_thresholds.size(); ++i) {
      out.distance_precision[i] += s.distance_precision(out.distance_thresholds[i]);
    }
  }
  const double n = static_cast<double>(gt.size());
  out.mean_voc /= n;
  out.mean_cle = cle_tracks > 0 ? cle_sum / cle_tracks : std::numeric_limits<double>::quiet_NaN();
  for (auto& v : out.overlap_precision) v /= n;
  for (auto& v : out.distance_precision) v /= n;
  return out;
}

ClearMotResult clear_mot(const std::vector<Track>& gt, const std::vector<Track>& hyps,
                         double match_threshold) {
  if (!(match_threshold > 0.0 && match_threshold < 1.0)) {
    throw InvalidArgument("CLEAR match threshold must be in (0, 1)");
  }
  ClearMotResult out;
  std::set<int> frames;
  for (const auto& t : gt) {
    out.gt_total += static_cast<int>(t.boxes.size());
    for (int f = t.first_frame; f <= t.last_frame(); ++f) frames.insert(f);
  }
  if (out.gt_total == 0) throw UndefinedMetric("MOTA is undefined without ground-truth boxes");
  for (const auto& t : hyps) {
    for (int f = t.first_frame; f <= t.last_frame(); ++f) frames.insert(f);
  }

  std::map<std::size_t, std::size_t> previous;  // gt index -> hyp index matched on the last frame
  std::map<std::size_t, std::size_t> last_seen;  // gt index -> most recent hyp index ever matched
  double iou_sum = 0.0;

  for (int f : frames) {
    FrameEval eval;
    eval.frame = f;
    std::vector<std::size_t> g_present, h_present;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i].covers(f)) g_present.push_back(i);
    }
    for (std::size_t j = 0; j < hyps.size(); ++j) {
      if (hyps[j].covers(f)) h_present.push_back(j);
    }

    std::map<std::size_t, std::size_t> current;
    std::set<std::size_t> h_used;
    for (auto gi : g_present) {
      auto it = previous.find(gi);
      if (it == previous.end() || !hyps[it->second].covers(f)) continue;
      if (iou(*gt[gi].box_at(f), *hyps[it->second].box_at(f)) >= match_threshold) {
        current[gi] = it->second;
        h_used.insert(it->second);
      }
    }

    std::vector<std::size_t> g_open, h_open;
    for (auto gi : g_present) {
      if (!current.contains(gi)) g_open.push_back(gi);
    }
    for (auto hj : h_present) {
      if (!h_used.contains(hj)) h_open.push_back(hj);
    }
    if (!g_open.empty() && !h_open.empty()) {
      const int rows = static_cast<int>(g_open.size());
      const int cols = static_cast<int>(h_open.size());
      CostMatrix costs(rows, cols);
      std::vector<char> allowed(static_cast<std::size_t>(rows) * cols, 0);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const double v = iou(*gt[g_open[r]].box_at(f), *hyps[h_open[c]].box_at(f));
          if (v >= match_threshold) {
            allowed[static_cast<std::size_t>(r) * cols + c] = 1;
            costs(r, c) = 1.0 - v;
          }
        }
      }
      // Invalid pairs cost more than any set of valid ones.
      const double forbidden = static_cast<double>(std::min(rows, cols) + 1);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (!allowed[static_cast<std::size_t>(r) * cols + c]) costs(r, c) = forbidden;
        }
      }
      for (const auto& [r, c] : hungarian_assign(costs).pairs) {
        if (!allowed[static_cast<std::size_t>(r) * cols + c]) continue;
        const auto gi = g_open[r];
        const auto hj = h_open[c];
        current[gi] = hj;
        auto seen = last_seen.find(gi);
        if (seen != last_seen.end() && seen->second != hj) ++eval.id_switches;
      }
    }

    std::set<std::size_t> h_matched;
    for (const auto& [gi, hj] : current) {
      const auto g = *gt[gi].box_at(f);
      const auto h = *hyps[hj].box_at(f);
      eval.matches.push_back({gt[gi].track_id, hyps[hj].track_id, iou(g, h), cle(g, h)});
      iou_sum += eval.matches.back().iou;
      last_seen[gi] = hj;
      h_matched.insert(hj);
    }
    eval.misses = static_cast<int>(g_present.size() - current.size());
    eval.false_positives = static_cast<int>(h_present.size() - h_matched.size());

    out.matches += static_cast<int>(eval.matches.size());
    out.misses += eval.misses;
    out.false_positives += eval.false_positives;
    out.id_switches += eval.id_switches;
    previous = std::move(current);
    out.frames.push_back(std::move(eval));
  }

  out.mota = 100.0 * (1.0 - static_cast<double>(out.misses + out.false_positives + out.id_switches) /
                                static_cast<double>(out.gt_total));
  out.motp = out.matches > 0 ? 100.0 * iou_sum / out.matches : 0.0;
  return out;
}

}  // namespace search_tracker
