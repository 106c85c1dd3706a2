#include "search_tracker/annotation_transfer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

using Histogram = std::vector<std::int64_t>;

int bin_of(double value, double range, int bins) {
  if (!(range > 0.0)) return 0;
  const int b = static_cast<int>(value / range * bins);
  return std::clamp(b, 0, bins - 1);
}

// Adds the magnitudes of [x0, x1) x [y0, y1) to `hist`.
void add_rect(Histogram& hist, const MagnitudeField& field, int x0, int y0, int x1, int y1,
              double value_scale, double range) {
  const int bins = static_cast<int>(hist.size());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) ++hist[bin_of(field.at(x, y) * value_scale, range, bins)];
  }
}

double intersection(const Histogram& a, std::int64_t na, const Histogram& b, std::int64_t nb) {
  if (na <= 0 || nb <= 0) return 0.0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::min(a[i] * nb, b[i] * na);
  return static_cast<double>(total) / (static_cast<double>(na) * static_cast<double>(nb));
}

int edge_of(const BoundingBox& b, Edge e) {
  switch (e) {
    case Edge::left:
      return b.left;
    case Edge::top:
      return b.top;
    case Edge::right:
      return b.right;
    case Edge::bottom:
      return b.bottom;
  }
  return 0;
}

void set_edge(BoundingBox& b, Edge e, int value) {
  switch (e) {
    case Edge::left:
      b.left = value;
      break;
    case Edge::top:
      b.top = value;
      break;
    case Edge::right:
      b.right = value;
      break;
    case Edge::bottom:
      b.bottom = value;
      break;
  }
}

struct SearchRange {
  int lo = 0;
  int hi = -1;
  bool empty() const { return lo > hi; }
};

SearchRange search_range(Edge edge, const BoundingBox& q, int anchor_edge, double alpha, int width,
                         int height) {
  const int reach = static_cast<int>(std::floor(3.0 * std::sqrt(alpha)));
  SearchRange r{anchor_edge - reach, anchor_edge + reach};
  switch (edge) {
    case Edge::left:
      r.lo = std::max(r.lo, 0);
      r.hi = std::min(r.hi, q.right - 2);
      break;
    case Edge::right:
      r.lo = std::max(r.lo, q.left + 2);
      r.hi = std::min(r.hi, width);
      break;
    case Edge::top:
      r.lo = std::max(r.lo, 0);
      r.hi = std::min(r.hi, q.bottom - 2);
      break;
    case Edge::bottom:
      r.lo = std::max(r.lo, q.top + 2);
      r.hi = std::min(r.hi, height);
      break;
  }
  return r;
}

Histogram result_histogram(const WarpReference& ref, double range, int bins) {
  Histogram hist(static_cast<std::size_t>(bins), 0);
  const auto b = clamp_box(ref.box, ref.field->width, ref.field->height);
  add_rect(hist, *ref.field, b.left, b.top, b.right, b.bottom, ref.transform.magnitude_scale(), range);
  return hist;
}

void check_params(const WarpParams& params) {
  if (!(params.alpha > 0.0) || params.bins < 2 || params.batches < 1) {
    throw InvalidArgument("warp needs alpha > 0, bins >= 2, batches >= 1");
  }
}

}  // namespace

BoundingBox BoxTransform::apply(const BoundingBox& box) const {
  return {static_cast<int>(std::lround(offset_x + scale_x * box.left)),
          static_cast<int>(std::lround(offset_y + scale_y * box.top)),
          static_cast<int>(std::lround(offset_x + scale_x * box.right)),
          static_cast<int>(std::lround(offset_y + scale_y * box.bottom))};
}

double BoxTransform::magnitude_scale() const { return std::sqrt(scale_x * scale_y); }

std::vector<CandidateBox> transfer_boxes(const CompositionResult& result, const LibraryIndex& index,
                                         const ScaleConfig& config, int query_frames) {
  std::vector<CandidateBox> out;
  const int step = index.params.step;
  const int window = index.params.fragment_length * step;
  const int query_begin = result.query_fragment_id.start_t * step;
  const Region& region = config.region;

  for (const auto& chosen : result.chosen) {
    const auto& fragment = index.fragments.at(chosen.fragment);
    const auto* video = index.find_video(fragment.id.video_id);
    if (!video) throw ReferenceError("fragment of unknown video " + fragment.id.video_id);
    const BoxTransform transform{static_cast<double>(region.width) / video->width,
                                 static_cast<double>(region.height) / video->height,
                                 static_cast<double>(region.x), static_cast<double>(region.y)};
    const int lib_begin = fragment.id.start_t * step;
    for (const auto& key : index.track_inverse.at(chosen.fragment)) {
      const Track& track = index.tracks.at(key);
      const int first = std::max(lib_begin, track.first_frame);
      const int last = std::min(lib_begin + window - 1, track.last_frame());
      for (int f = first; f <= last; ++f) {
        const int query_frame = query_begin + (f - lib_begin);
        if (query_frame >= query_frames) break;
        const BoundingBox lib_box = *track.box_at(f);
        BoundingBox mapped = transform.apply(lib_box);
        mapped = {std::clamp(mapped.left, region.x, region.x + region.width),
                  std::clamp(mapped.top, region.y, region.y + region.height),
                  std::clamp(mapped.right, region.x, region.x + region.width),
                  std::clamp(mapped.bottom, region.y, region.y + region.height)};
        if (!mapped.valid()) continue;
        CandidateBox c;
        c.frame = query_frame;
        c.box = mapped;
        c.source_fragment = fragment.id;
        c.source_track = key;
        c.source_frame = f;
        c.result_box = lib_box;
        c.transform = transform;
        c.config_id = config.config_id;
        c.match_score = result.final_score;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

double warp_histogram_range(const BoundingBox& query_box, const WarpReference& ref,
                            const MagnitudeField& query_mag) {
  const BoundingBox anchor = ref.transform.apply(ref.box);
  const BoundingBox hull{std::min(query_box.left, anchor.left), std::min(query_box.top, anchor.top),
                         std::max(query_box.right, anchor.right),
                         std::max(query_box.bottom, anchor.bottom)};
  double range = 0.0;
  const auto qh = clamp_box(hull, query_mag.width, query_mag.height);
  for (int y = qh.top; y < qh.bottom; ++y) {
    for (int x = qh.left; x < qh.right; ++x) range = std::max(range, static_cast<double>(query_mag.at(x, y)));
  }
  // The hull carried back into library pixels.
  const auto& t = ref.transform;
  const BoundingBox back{static_cast<int>(std::floor((hull.left - t.offset_x) / t.scale_x)),
                         static_cast<int>(std::floor((hull.top - t.offset_y) / t.scale_y)),
                         static_cast<int>(std::ceil((hull.right - t.offset_x) / t.scale_x)),
                         static_cast<int>(std::ceil((hull.bottom - t.offset_y) / t.scale_y))};
  const auto rh = clamp_box(back, ref.field->width, ref.field->height);
  const double scale = t.magnitude_scale();
  for (int y = rh.top; y < rh.bottom; ++y) {
    for (int x = rh.left; x < rh.right; ++x) {
      range = std::max(range, static_cast<double>(ref.field->at(x, y)) * scale);
    }
  }
  return range;
}

double warp_objective(Edge edge, int position, const BoundingBox& query_box, const WarpReference& ref,
                      const MagnitudeField& query_mag, const WarpParams& params) {
  check_params(params);
  const double range = warp_histogram_range(query_box, ref, query_mag);
  const auto hr = result_histogram(ref, range, params.bins);
  const auto nr = std::accumulate(hr.begin(), hr.end(), std::int64_t{0});
  BoundingBox candidate = query_box;
  set_edge(candidate, edge, position);
  const auto c = clamp_box(candidate, query_mag.width, query_mag.height);
  Histogram hq(static_cast<std::size_t>(params.bins), 0);
  add_rect(hq, query_mag, c.left, c.top, c.right, c.bottom, 1.0, range);
  const double d = edge_of(ref.transform.apply(ref.box), edge) - position;
  return intersection(hq, c.valid() ? c.area() : 0, hr, nr) * std::exp(-(d * d) / (2.0 * params.alpha));
}

int warp_edge(Edge edge, const BoundingBox& query_box, const WarpReference& ref,
              const MagnitudeField& query_mag, const WarpParams& params) {
  check_params(params);
  if (ref.field == nullptr) throw InvalidArgument("warp reference has no magnitude field");
  const int current = edge_of(query_box, edge);
  const int anchor = edge_of(ref.transform.apply(ref.box), edge);
  const auto range = search_range(edge, query_box, anchor, params.alpha, query_mag.width, query_mag.height);
  if (range.empty()) return current;

  const double hist_range = warp_histogram_range(query_box, ref, query_mag);
  const auto hr = result_histogram(ref, hist_range, params.bins);
  const auto nr = std::accumulate(hr.begin(), hr.end(), std::int64_t{0});
  Histogram hq(static_cast<std::size_t>(params.bins), 0);
  const BoundingBox& q = query_box;

  int best = current;
  double best_value = -1.0;
  auto consider = [&](int position, std::int64_t area) {
    const double d = static_cast<double>(anchor - position);
    const double value =
        intersection(hq, area, hr, nr) * std::exp(-(d * d) / (2.0 * params.alpha));
    const bool better =
        value > best_value ||
        (value == best_value &&
         (std::abs(position - anchor) < std::abs(best - anchor) ||
          (std::abs(position - anchor) == std::abs(best - anchor) && position < best)));
    if (better) {
      best_value = value;
      best = position;
    }
  };

  // Sweep the candidate positions, growing the box one row or column at a time.
  switch (edge) {
    case Edge::left: {
      add_rect(hq, query_mag, range.hi, q.top, q.right, q.bottom, 1.0, hist_range);
      for (int c = range.hi; c >= range.lo; --c) {
        if (c < range.hi) add_rect(hq, query_mag, c, q.top, c + 1, q.bottom, 1.0, hist_range);
        consider(c, static_cast<std::int64_t>(q.right - c) * q.height());
      }
      break;
    }
    case Edge::right: {
      add_rect(hq, query_mag, q.left, q.top, range.lo, q.bottom, 1.0, hist_range);
      for (int c = range.lo; c <= range.hi; ++c) {
        if (c > range.lo) add_rect(hq, query_mag, c - 1, q.top, c, q.bottom, 1.0, hist_range);
        consider(c, static_cast<std::int64_t>(c - q.left) * q.height());
      }
      break;
    }
    case Edge::top: {
      add_rect(hq, query_mag, q.left, range.hi, q.right, q.bottom, 1.0, hist_range);
      for (int c = range.hi; c >= range.lo; --c) {
        if (c < range.hi) add_rect(hq, query_mag, q.left, c, q.right, c + 1, 1.0, hist_range);
        consider(c, static_cast<std::int64_t>(q.bottom - c) * q.width());
      }
      break;
    }
    case Edge::bottom: {
      add_rect(hq, query_mag, q.left, q.top, q.right, range.lo, 1.0, hist_range);
      for (int c = range.lo; c <= range.hi; ++c) {
        if (c > range.lo) add_rect(hq, query_mag, q.left, c - 1, q.right, c, 1.0, hist_range);
        consider(c, static_cast<std::int64_t>(c - q.top) * q.width());
      }
      break;
    }
  }
  return best;
}

int warp_edge(Edge edge, const BoundingBox& query_box, const BoundingBox& result_box,
              const MagnitudeField& query_mag, const MagnitudeField& result_mag,
              const WarpParams& params) {
  return warp_edge(edge, query_box, WarpReference{&result_mag, result_box, {}}, query_mag, params);
}

BoundingBox warp_box(const BoundingBox& query_box, const WarpReference& ref,
                     const MagnitudeField& query_mag, const WarpParams& params) {
  check_params(params);
  BoundingBox box = query_box;
  std::mt19937_64 rng(params.seed);
  std::array<Edge, 4> order = {Edge::left, Edge::top, Edge::right, Edge::bottom};
  for (int round = 0; round < params.batches; ++round) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    bool changed = false;
    for (Edge e : order) {
      const int updated = warp_edge(e, box, ref, query_mag, params);
      if (updated != edge_of(box, e)) {
        set_edge(box, e, updated);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return box;
}

BoundingBox warp_box(const BoundingBox& query_box, const BoundingBox& result_box,
                     const MagnitudeField& query_mag, const MagnitudeField& result_mag,
                     const WarpParams& params) {
  return warp_box(query_box, WarpReference{&result_mag, result_box, {}}, query_mag, params);
}

double flow_density(const MagnitudeField& field, const BoundingBox& box) {
  const auto b = clamp_box(box, field.width, field.height);
  if (!b.valid()) return 0.0;
  double sum = 0.0;
  for (int y = b.top; y < b.bottom; ++y) {
    for (int x = b.left; x < b.right; ++x) sum += field.at(x, y);
  }
  return sum / static_cast<double>(b.area());
}

std::vector<CandidateBox> nms(std::span<const CandidateBox> candidates, const MagnitudeField& query_mag,
                              const NmsParams& params) {
  // Summed-area table so each density is four lookups.
  const int w = query_mag.width;
  const int h = query_mag.height;
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto s = [&](int x, int y) -> double& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += query_mag.at(x, y);
      s(x + 1, y + 1) = s(x + 1, y) + row;
    }
  }

  std::vector<CandidateBox> ranked;
  ranked.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto b = clamp_box(c.box, w, h);
    if (!b.valid()) continue;
    CandidateBox scored = c;
    scored.warp_score =
        (s(b.right, b.bottom) - s(b.left, b.bottom) - s(b.right, b.top) + s(b.left, b.top)) /
        static_cast<double>(b.area());
    if (scored.warp_score < params.min_density) continue;
    ranked.push_back(std::move(scored));
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const CandidateBox& a, const CandidateBox& b) {
    if (a.warp_score != b.warp_score) return a.warp_score > b.warp_score;
    if (a.match_score != b.match_score) return a.match_score > b.match_score;
    if (a.box.area() != b.box.area()) return a.box.area() > b.box.area();
    return a.box < b.box;
  });

  std::vector<CandidateBox> kept;
  for (auto& c : ranked) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const CandidateBox& k) {
      return iou(k.box, c.box) > params.iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace search_tracker
