#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "search_tracker/flow.hpp"
#include "search_tracker/library_index.hpp"
#include "search_tracker/motion_document.hpp"

namespace search_tracker {

struct RetrievalParams {
  double rho = 0.1;         // stop once at most rho * |f_q| activations are uncovered
  int max_iterations = 16;
};

struct ChosenFragment {
  std::uint32_t fragment = 0;  // position in LibraryIndex::fragments
  double score = 0.0;          // composition score after adding this fragment
};

struct CompositionResult {
  FragmentId query_fragment_id;
  std::vector<ChosenFragment> chosen;
  double final_score = 0.0;
  std::size_t covered = 0;     // |f_q ∩ f_R|
  std::size_t query_size = 0;  // |f_q|
};

/// |f_q ∩ f_R| / max(|f_q|, |f_R|): the histogram intersection of the two sets
/// viewed as uniform distributions. Throws EmptyQuery for an empty f_q.
double composition_score(const ActivationSet& query, const ActivationSet& result);

/// Size of the intersection of two sorted activation sets.
std::size_t intersection_size(const ActivationSet& a, const ActivationSet& b);

/// Greedy composition: repeatedly adds the candidate sharing an activation with
/// the uncovered part of the query that maximizes the composition score. Ties go
/// to the lexicographically smallest fragment id. Stops when the uncovered part
/// is at most rho * |f_q|, no candidate remains, or max_iterations is reached.
CompositionResult greedy_compose(const Fragment& query, const LibraryIndex& index,
                                 const RetrievalParams& params);

struct QueryMatch {
  ScaleConfig config;
  CompositionResult result;
};

/// Document parameters for a query of the given size: the library's, with the
/// cube edge rescaled when needed so the query grid equals the library grid.
DocumentParams query_document_params(const LibraryIndex& index, int width, int height);

/// Builds documents for all 21 configurations of the query, fragments them and
/// composes every nonempty fragment. Results are ordered by (config, start_t).
std::vector<QueryMatch> query_video(std::span<const FlowField> step_flows,
                                    const std::string& query_id, const LibraryIndex& index,
                                    const RetrievalParams& params);

}  // namespace search_tracker
