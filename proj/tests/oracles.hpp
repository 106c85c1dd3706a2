#pragma once

// Reference implementations used as test oracles. Deliberately naive: full
// rescans and enumeration, no incremental state.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "search_tracker/annotation_transfer.hpp"
#include "search_tracker/association.hpp"
#include "search_tracker/library_index.hpp"
#include "search_tracker/retrieval.hpp"

namespace oracles {

using namespace search_tracker;

/// Minimum total cost over every assignment of min(rows, cols) pairs.
inline double brute_force_assignment(const CostMatrix& m) {
  const int n = std::min(m.rows(), m.cols());
  const bool by_rows = m.rows() <= m.cols();
  std::vector<int> perm(std::max(m.rows(), m.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = HUGE_VAL;
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += by_rows ? m(i, perm[i]) : m(perm[i], i);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// ---- greedy composition ----

inline double h_score(const std::set<Activation>& q, const std::set<Activation>& c) {
  std::size_t inter = 0;
  for (const auto& a : q) inter += c.count(a);
  return static_cast<double>(inter) / static_cast<double>(std::max(q.size(), c.size()));
}

/// Replays `result` against an exhaustive candidate scan. Returns problems.
inline std::vector<std::string> greedy_trace_problems(const Fragment& query, const LibraryIndex& index,
                                                      const CompositionResult& result) {
  std::vector<std::string> problems;
  const std::set<Activation> fq(query.activations.begin(), query.activations.end());
  std::set<Activation> composed;
  for (std::size_t step = 0; step < result.chosen.size(); ++step) {
    double best = -1.0;
    std::uint32_t best_id = 0;
    for (std::uint32_t x = 0; x < index.fragments.size(); ++x) {
      const auto& acts = index.fragments[x].activations;
      const bool shares = std::any_of(acts.begin(), acts.end(),
                                      [&](const Activation& a) { return fq.count(a) && !composed.count(a); });
      if (!shares) continue;
      auto cand = composed;
      cand.insert(acts.begin(), acts.end());
      const double h = h_score(fq, cand);
      if (h > best + 1e-12) {
        best = h;
        best_id = x;
      }
    }
    const auto& chosen = result.chosen[step];
    if (chosen.fragment != best_id || std::abs(chosen.score - best) > 1e-12) {
      problems.push_back("step " + std::to_string(step) + ": picked " + std::to_string(chosen.fragment) +
                         " (h=" + std::to_string(chosen.score) + "), scan best " + std::to_string(best_id) +
                         " (h=" + std::to_string(best) + ")");
    }
    const auto& acts = index.fragments[chosen.fragment].activations;
    composed.insert(acts.begin(), acts.end());
  }
  return problems;
}

inline std::size_t coverage(const ActivationSet& query, const ActivationSet& f) {
  std::size_t n = 0;
  for (const auto& a : query) n += std::binary_search(f.begin(), f.end(), a);
  return n;
}

// ---- warping ----

inline int& edge_ref(BoundingBox& b, Edge e) {
  switch (e) {
    case Edge::left: return b.left;
    case Edge::top: return b.top;
    case Edge::right: return b.right;
    default: return b.bottom;
  }
}

inline int edge_value(BoundingBox b, Edge e) { return edge_ref(b, e); }

/// Warp objective from scratch, identity transform between the two fields.
inline double warp_objective(Edge edge, int position, const BoundingBox& q, const BoundingBox& r,
                             const MagnitudeField& qm, const MagnitudeField& rm, double alpha, int bins) {
  const int hl = std::min(q.left, r.left), ht = std::min(q.top, r.top);
  const int hr = std::max(q.right, r.right), hb = std::max(q.bottom, r.bottom);
  double range = 0.0;
  for (int y = ht; y < hb; ++y) {
    for (int x = hl; x < hr; ++x) range = std::max({range, double(qm.at(x, y)), double(rm.at(x, y))});
  }
  auto hist = [&](const MagnitudeField& m, const BoundingBox& b) {
    std::vector<double> h(bins, 0.0);
    const double n = double(b.width()) * b.height();
    for (int y = b.top; y < b.bottom; ++y) {
      for (int x = b.left; x < b.right; ++x) {
        const int k = range > 0 ? int(m.at(x, y) / range * bins) : 0;
        h[std::clamp(k, 0, bins - 1)] += 1.0 / n;
      }
    }
    return h;
  };
  BoundingBox cand = q;
  edge_ref(cand, edge) = position;
  const auto a = hist(qm, cand);
  const auto b = hist(rm, r);
  double inter = 0.0;
  for (int i = 0; i < bins; ++i) inter += std::min(a[i], b[i]);
  const double d = edge_value(r, edge) - position;
  return inter * std::exp(-d * d / (2.0 * alpha));
}

/// Exhaustive argmax over every integer position keeping a 2 px box inside the
/// frame and within 3 sqrt(alpha) of the result edge; ties go to the position
/// closest to the result edge, then the smaller one.
inline int warp_edge(Edge edge, const BoundingBox& q, const BoundingBox& r, const MagnitudeField& qm,
                     const MagnitudeField& rm, double alpha, int bins) {
  const int reach = int(std::floor(3.0 * std::sqrt(alpha)));
  const int e_r = edge_value(r, edge);
  int best = edge_value(q, edge);
  double best_v = -1.0;
  const int limit = (edge == Edge::left || edge == Edge::right) ? qm.width : qm.height;
  for (int p = 0; p <= limit; ++p) {
    if (std::abs(p - e_r) > reach) continue;
    BoundingBox cand = q;
    edge_ref(cand, edge) = p;
    if (cand.width() < 2 || cand.height() < 2) continue;
    const double v = warp_objective(edge, p, q, r, qm, rm, alpha, bins);
    if (v > best_v + 1e-12 || (std::abs(v - best_v) <= 1e-12 && std::abs(p - e_r) < std::abs(best - e_r))) {
      best_v = v;
      best = p;
    }
  }
  return best;
}

// ---- index integrity ----

/// Independent transpose and reference scan of all five tables.
inline std::vector<std::string> index_problems(const LibraryIndex& index) {
  std::vector<std::string> problems;
  std::size_t forward_pairs = 0;
  for (std::size_t i = 0; i < index.fragments.size(); ++i) {
    for (const auto& a : index.fragments[i].activations) {
      ++forward_pairs;
      auto it = index.inverse.find(a);
      if (it == index.inverse.end() ||
          std::count(it->second.begin(), it->second.end(), static_cast<std::uint32_t>(i)) != 1) {
        problems.push_back("fragment " + std::to_string(i) + " missing from an inverse posting");
      }
    }
  }
  std::size_t inverse_pairs = 0;
  for (const auto& [a, postings] : index.inverse) {
    for (auto p : postings) {
      ++inverse_pairs;
      if (p >= index.fragments.size() ||
          !std::binary_search(index.fragments[p].activations.begin(), index.fragments[p].activations.end(), a)) {
        problems.push_back("inverse posting " + std::to_string(p) + " has no forward entry");
      }
    }
  }
  if (forward_pairs != inverse_pairs) problems.push_back("forward and inverse pair counts differ");
  if (index.track_inverse.size() != index.fragments.size()) {
    problems.push_back("track inverse table is not parallel to the fragments");
    return problems;
  }
  for (std::size_t i = 0; i < index.fragments.size(); ++i) {
    for (const auto& key : index.track_inverse[i]) {
      if (!index.tracks.count(key) || key.video_id != index.fragments[i].id.video_id ||
          key.flip != index.fragments[i].id.flip) {
        problems.push_back("dangling track reference from fragment " + std::to_string(i));
      }
    }
  }
  for (const auto& f : index.fragments) {
    if (!index.find_video(f.id.video_id)) problems.push_back("fragment of unknown video " + f.id.video_id);
  }
  for (const auto& [key, track] : index.tracks) {
    if (!index.find_video(key.video_id)) problems.push_back("track of unknown video " + key.video_id);
  }
  for (const auto& [key, field] : index.flow_fields) {
    if (!index.find_video(key.video_id)) problems.push_back("flow field of unknown video " + key.video_id);
  }
  return problems;
}

}  // namespace oracles
