#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "search_tracker/flow.hpp"
#include "search_tracker/geometry.hpp"
#include "search_tracker/library_index.hpp"
#include "search_tracker/motion_document.hpp"
#include "search_tracker/retrieval.hpp"

namespace search_tracker {

/// Affine map from library pixels into query pixels.
struct BoxTransform {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  BoundingBox apply(const BoundingBox& box) const;
  /// Factor that converts library flow magnitudes to query pixel units.
  double magnitude_scale() const;

  friend bool operator==(const BoxTransform&, const BoxTransform&) = default;
};

/// A library box transferred into a query frame.
struct CandidateBox {
  int frame = 0;            // query frame
  BoundingBox box;          // query coordinates
  FragmentId source_fragment;
  TrackKey source_track;
  int source_frame = 0;     // library frame the box was annotated on
  BoundingBox result_box;   // the library annotation, library coordinates
  BoxTransform transform;   // library -> query
  int config_id = 0;
  double match_score = 0.0; // composition score of the retrieval that produced it
  double warp_score = 0.0;  // flow density, filled in by NMS
};

/// Looks up the tracks of every chosen fragment and maps their boxes over the
/// fragment's frame window into `config`'s region of the query. Frames at or
/// beyond `query_frames` are skipped.
std::vector<CandidateBox> transfer_boxes(const CompositionResult& result, const LibraryIndex& index,
                                         const ScaleConfig& config, int query_frames);

struct WarpParams {
  double alpha = 2000.0;  // variance of the edge displacement penalty
  int bins = 16;          // magnitude histogram bins
  int batches = 10;       // rounds over the four edges
  std::uint64_t seed = 0;
};

enum class Edge : int { left = 0, top = 1, right = 2, bottom = 3 };

/// The result side of a warp: the library annotation on the library magnitude
/// field, plus the map that carries it into query coordinates.
struct WarpReference {
  const MagnitudeField* field = nullptr;
  BoundingBox box;
  BoxTransform transform;
};

/// Shared histogram range for one warp: [0, max magnitude] over the bounding
/// region of b_q and the mapped b_r in both fields.
double warp_histogram_range(const BoundingBox& query_box, const WarpReference& ref,
                            const MagnitudeField& query_mag);

/// Updates one edge of `query_box` to the integer position maximizing
///   [sum_i min(H_r(i), H_q'(i))] * exp(-(e_r - e')^2 / (2 alpha))
/// over [e_r - 3 sqrt(alpha), e_r + 3 sqrt(alpha)] clamped to the frame and to
/// a 2 px minimum box side. Ties prefer the position closest to e_r, then the
/// smaller coordinate. An empty search range returns the current edge.
int warp_edge(Edge edge, const BoundingBox& query_box, const WarpReference& ref,
              const MagnitudeField& query_mag, const WarpParams& params);

/// Same, with b_r already in query coordinates.
int warp_edge(Edge edge, const BoundingBox& query_box, const BoundingBox& result_box,
              const MagnitudeField& query_mag, const MagnitudeField& result_mag,
              const WarpParams& params);

/// Objective value of one candidate edge position.
double warp_objective(Edge edge, int position, const BoundingBox& query_box,
                      const WarpReference& ref, const MagnitudeField& query_mag,
                      const WarpParams& params);

/// Rounds of randomly ordered edge updates; stops after a round without change.
BoundingBox warp_box(const BoundingBox& query_box, const WarpReference& ref,
                     const MagnitudeField& query_mag, const WarpParams& params);

BoundingBox warp_box(const BoundingBox& query_box, const BoundingBox& result_box,
                     const MagnitudeField& query_mag, const MagnitudeField& result_mag,
                     const WarpParams& params);

struct NmsParams {
  double iou_threshold = 0.5;
  double min_density = 0.5;  // boxes covering less mean flow are dropped
};

/// Mean magnitude inside `box`.
double flow_density(const MagnitudeField& field, const BoundingBox& box);

/// Greedy suppression of one frame's candidates ranked by flow density
/// (ties: match score, then area, then coordinates). Fills warp_score.
std::vector<CandidateBox> nms(std::span<const CandidateBox> candidates, const MagnitudeField& query_mag,
                              const NmsParams& params = {});

}  // namespace search_tracker
