#include "search_tracker/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "search_tracker/errors.hpp"

namespace search_tracker {

HsvHistogram hsv_histogram(const RgbImage& frame, const BoundingBox& box) {
  HsvHistogram hist;
  const auto b = clamp_box(box, frame.width, frame.height);
  if (!b.valid()) return hist;
  for (int y = b.top; y < b.bottom; ++y) {
    for (int x = b.left; x < b.right; ++x) {
      const auto* p = frame.pixel(x, y);
      const double r = p[0] / 255.0;
      const double g = p[1] / 255.0;
      const double bl = p[2] / 255.0;
      const double mx = std::max({r, g, bl});
      const double mn = std::min({r, g, bl});
      const double delta = mx - mn;
      const double sat = mx > 0.0 ? delta / mx : 0.0;
      double hue = 0.0;  // undefined for gray pixels; pinned to bin 0
      if (delta > 0.0) {
        if (mx == r) {
          hue = 60.0 * std::fmod((g - bl) / delta, 6.0);
        } else if (mx == g) {
          hue = 60.0 * ((bl - r) / delta + 2.0);
        } else {
          hue = 60.0 * ((r - g) / delta + 4.0);
        }
        if (hue < 0.0) hue += 360.0;
      }
      const int hb = std::min(kHueBins - 1, static_cast<int>(hue / (360.0 / kHueBins)));
      const int sb = std::min(kSaturationBins - 1, static_cast<int>(sat * kSaturationBins));
      hist.bins[hb * kSaturationBins + sb] += 1.0;
    }
  }
  const double n = static_cast<double>(b.area());
  for (auto& v : hist.bins) v /= n;
  return hist;
}

double histogram_distance(const HsvHistogram& a, const HsvHistogram& b) {
  double inter = 0.0;
  for (std::size_t i = 0; i < a.bins.size(); ++i) inter += std::min(a.bins[i], b.bins[i]);
  return 1.0 - inter;
}

double association_cost(const HsvHistogram& hist_a, const BoundingBox& a, const HsvHistogram& hist_b,
                        const BoundingBox& b, const AssociationParams& params) {
  return histogram_distance(hist_a, hist_b) + params.beta * cle(a, b);
}

double association_cost(const RgbImage& frame_a, const BoundingBox& a, const RgbImage& frame_b,
                        const BoundingBox& b, const AssociationParams& params) {
  return association_cost(hsv_histogram(frame_a, a), a, hsv_histogram(frame_b, b), b, params);
}

Assignment hungarian_assign(const CostMatrix& costs) {
  Assignment out;
  const int rows = costs.rows();
  const int cols = costs.cols();
  if (rows == 0 || cols == 0) return out;

  double max_cost = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!std::isfinite(costs(r, c))) throw InvalidArgument("assignment costs must be finite");
      max_cost = std::max(max_cost, costs(r, c));
    }
  }
  const int n = std::max(rows, cols);
  const double pad = 10.0 * (max_cost > 0.0 ? max_cost : 1.0);
  auto cost = [&](int r, int c) { return r < rows && c < cols ? costs(r, c) : pad; };

  // Shortest augmenting paths with row/column potentials, 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (int j = 1; j <= n; ++j) {
    const int r = match[j] - 1;
    const int c = j - 1;
    if (r < rows && c < cols) {
      out.pairs.emplace_back(r, c);
      out.total_cost += costs(r, c);
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  return out;
}

std::vector<Track> link_tracks(std::span<const std::vector<BoundingBox>> detections,
                               std::span<const RgbImage> frames, const AssociationParams& params) {
  if (params.beta < 0.0 || !(params.gate_distance > 0.0)) {
    throw InvalidArgument("association needs beta >= 0 and gate_distance > 0");
  }
  struct Active {
    std::size_t track;
    BoundingBox box;
    HsvHistogram hist;
  };
  std::vector<Track> tracks;
  std::vector<Active> active;
  const bool use_appearance = !frames.empty();

  for (std::size_t f = 0; f < detections.size(); ++f) {
    const auto& boxes = detections[f];
    std::vector<HsvHistogram> hists(boxes.size());
    if (use_appearance) {
      if (f >= frames.size()) throw InvalidArgument("fewer frames than detection lists");
      for (std::size_t j = 0; j < boxes.size(); ++j) hists[j] = hsv_histogram(frames[f], boxes[j]);
    }

    std::vector<char> det_taken(boxes.size(), 0);
    std::vector<Active> next;
    if (!active.empty() && !boxes.empty()) {
      const int rows = static_cast<int>(active.size());
      const int cols = static_cast<int>(boxes.size());
      CostMatrix costs(rows, cols);
      std::vector<char> allowed(static_cast<std::size_t>(rows) * cols, 0);
      double max_feasible = 0.0;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (cle(active[r].box, boxes[c]) > params.gate_distance) continue;
          allowed[static_cast<std::size_t>(r) * cols + c] = 1;
          costs(r, c) = association_cost(active[r].hist, active[r].box, hists[c], boxes[c], params);
          max_feasible = std::max(max_feasible, costs(r, c));
        }
      }
      // Forbidden pairs cost more than any complete feasible assignment.
      const double forbidden = (max_feasible + 1.0) * (std::min(rows, cols) + 1);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          if (!allowed[static_cast<std::size_t>(r) * cols + c]) costs(r, c) = forbidden;
        }
      }
      for (const auto& [r, c] : hungarian_assign(costs).pairs) {
        if (!allowed[static_cast<std::size_t>(r) * cols + c]) continue;
        det_taken[c] = 1;
        tracks[active[r].track].boxes.push_back(boxes[c]);
        next.push_back({active[r].track, boxes[c], hists[c]});
      }
    }
    for (std::size_t c = 0; c < boxes.size(); ++c) {
      if (det_taken[c]) continue;
      Track t;
      t.track_id = std::to_string(tracks.size());
      t.first_frame = static_cast<int>(f);
      t.boxes.push_back(boxes[c]);
      next.push_back({tracks.size(), boxes[c], hists[c]});
      tracks.push_back(std::move(t));
    }
    std::sort(next.begin(), next.end(), [](const Active& a, const Active& b) { return a.track < b.track; });
    active = std::move(next);
  }
  return tracks;
}

std::vector<Track> smooth_tracks(const std::vector<Track>& tracks, int half_window, int frame_width,
                                 int frame_height) {
  if (half_window < 0) throw InvalidArgument("smoothing half window must be >= 0");
  std::vector<Track> out;
  out.reserve(tracks.size());
  for (const auto& track : tracks) {
    Track smoothed = track;
    const int n = static_cast<int>(track.boxes.size());
    for (int i = 0; i < n; ++i) {
      const int lo = std::max(0, i - half_window);
      const int hi = std::min(n - 1, i + half_window);
      double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
      for (int k = lo; k <= hi; ++k) {
        const auto& b = track.boxes[k];
        cx += b.center_x();
        cy += b.center_y();
        w += b.width();
        h += b.height();
      }
      const double count = hi - lo + 1;
      cx /= count;
      cy /= count;
      w /= count;
      h /= count;
      BoundingBox b{static_cast<int>(std::lround(cx - 0.5 * w)), static_cast<int>(std::lround(cy - 0.5 * h)),
                    static_cast<int>(std::lround(cx + 0.5 * w)), static_cast<int>(std::lround(cy + 0.5 * h))};
      if (frame_width > 0 && frame_height > 0) {
        const auto c = clamp_box(b, frame_width, frame_height);
        if (c.valid()) b = c;
      }
      smoothed.boxes[i] = b;
    }
    out.push_back(std::move(smoothed));
  }
  return out;
}

}  // namespace search_tracker
