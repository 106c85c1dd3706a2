#include "search_tracker/retrieval.hpp"

#include <algorithm>
#include <iterator>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

ActivationSet set_union(const ActivationSet& a, const ActivationSet& b) {
  ActivationSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

ActivationSet set_difference(const ActivationSet& a, const ActivationSet& b) {
  ActivationSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// Exact rational score num/den, compared without rounding.
struct Ratio {
  std::size_t num = 0;
  std::size_t den = 1;

  bool greater_than(const Ratio& o) const { return num * o.den > o.num * den; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

}  // namespace

std::size_t intersection_size(const ActivationSet& a, const ActivationSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

double composition_score(const ActivationSet& query, const ActivationSet& result) {
  if (query.empty()) throw EmptyQuery("composition score of an empty query fragment");
  const auto inter = intersection_size(query, result);
  return static_cast<double>(inter) / static_cast<double>(std::max(query.size(), result.size()));
}

CompositionResult greedy_compose(const Fragment& query, const LibraryIndex& index,
                                 const RetrievalParams& params) {
  const ActivationSet& fq = query.activations;
  if (fq.empty()) throw EmptyQuery("greedy composition of an empty query fragment " + to_string(query.id));
  if (!(params.rho >= 0.0 && params.rho < 1.0) || params.max_iterations < 1) {
    throw InvalidArgument("retrieval needs rho in [0, 1) and max_iterations >= 1");
  }

  CompositionResult result;
  result.query_fragment_id = query.id;
  result.query_size = fq.size();

  ActivationSet uncovered = fq;
  ActivationSet composed;  // f_R
  const double stop = params.rho * static_cast<double>(fq.size());
  std::vector<std::uint32_t> candidates;

  while (static_cast<double>(uncovered.size()) > stop &&
         static_cast<int>(result.chosen.size()) < params.max_iterations) {
    candidates.clear();
    for (const auto& a : uncovered) {
      auto it = index.inverse.find(a);
      if (it != index.inverse.end()) {
        candidates.insert(candidates.end(), it->second.begin(), it->second.end());
      }
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    const std::size_t covered_now = fq.size() - uncovered.size();
    Ratio best;
    std::uint32_t best_fragment = candidates.front();
    bool have_best = false;
    // Candidates are ascending positions, i.e. ascending fragment ids, so a
    // strict comparison keeps the smallest id among ties.
    for (auto x : candidates) {
      const auto& fx = index.fragments[x].activations;
      const std::size_t gained = intersection_size(uncovered, fx);
      const std::size_t union_size = composed.size() + fx.size() - intersection_size(composed, fx);
      const Ratio h{covered_now + gained, std::max(fq.size(), union_size)};
      if (!have_best || h.greater_than(best)) {
        best = h;
        best_fragment = x;
        have_best = true;
      }
    }
    composed = set_union(composed, index.fragments[best_fragment].activations);
    uncovered = set_difference(fq, composed);
    result.chosen.push_back({best_fragment, best.value()});
  }

  result.covered = fq.size() - uncovered.size();
  result.final_score = result.chosen.empty() ? 0.0 : composition_score(fq, composed);
  return result;
}

DocumentParams query_document_params(const LibraryIndex& index, int width, int height) {
  DocumentParams params = index.params;
  if (index.cube_cols <= 0 || index.cube_rows <= 0) return params;
  if (width % index.cube_cols != 0 || height % index.cube_rows != 0 ||
      width / index.cube_cols != height / index.cube_rows ||
      (width / index.cube_cols) % 4 != 0) {
    throw GeometryError("query " + std::to_string(width) + "x" + std::to_string(height) +
                        " cannot be encoded on the library's " + std::to_string(index.cube_cols) +
                        "x" + std::to_string(index.cube_rows) + " cube grid");
  }
  params.cube_base = width / index.cube_cols;
  return params;
}

std::vector<QueryMatch> query_video(std::span<const FlowField> step_flows,
                                    const std::string& query_id, const LibraryIndex& index,
                                    const RetrievalParams& params) {
  std::vector<QueryMatch> matches;
  if (step_flows.empty()) return matches;
  const int width = step_flows.front().width;
  const int height = step_flows.front().height;
  const auto doc_params = query_document_params(index, width, height);
  for (const auto& config : multiscale_configs(width, height)) {
    const auto doc = build_document(step_flows, config, doc_params);
    for (const auto& fragment : fragmentize(doc, doc_params.fragment_length, query_id)) {
      if (fragment.activations.empty()) continue;
      matches.push_back({config, greedy_compose(fragment, index, params)});
    }
  }
  return matches;
}

}  // namespace search_tracker
