#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "search_tracker/errors.hpp"
#include "search_tracker/retrieval.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace search_tracker;

namespace {

Activation act(std::uint32_t w, std::uint32_t t = 0) { return {w, t}; }

ActivationSet sorted(ActivationSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

LibraryIndex manual_index(const std::vector<ActivationSet>& sets) {
  LibraryIndex index;
  index.word_count = 768;
  index.cube_cols = 16;
  index.cube_rows = 12;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    index.fragments.push_back({FragmentId{"lib", 0, FlipVariant::original, static_cast<int>(i)}, sorted(sets[i])});
  }
  index.track_inverse.resize(sets.size());
  rebuild_inverse(index);
  return index;
}

Fragment query_of(ActivationSet s) { return {FragmentId{"q", 0, FlipVariant::original, 0}, sorted(std::move(s))}; }

std::set<Activation> as_set(const ActivationSet& s) { return {s.begin(), s.end()}; }

LibraryVideo moving_box_video(const std::string& id, int w, int h, int frames, BoundingBox start, int vx) {
  LibraryVideo v{id, w, h, {}};
  for (int f = 0; f < frames; ++f) {
    const BoundingBox b{start.left + vx * f, start.top, start.right + vx * f, start.bottom};
    v.frame_flows.push_back(test_support::box_flow(w, h, clamp_box(b, w, h), static_cast<float>(vx), 0.0f));
  }
  return v;
}

}  // namespace

TEST_SUITE("composition_score") {
  const Activation a = act(0), b = act(1), c = act(2);

  TEST_CASE("identical, subset and superset") {
    CHECK(composition_score({a, b}, {a, b}) == 1.0);
    CHECK(composition_score({a, b}, {a}) == 0.5);
    CHECK(composition_score({a, b}, {a, b, c}) == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("empty query throws") { CHECK_THROWS_AS(composition_score({}, {a}), EmptyQuery); }

  TEST_CASE("score is in [0, 1] and equals 1 only for equal sets") {
    std::mt19937 rng(1);
    for (int i = 0; i < 300; ++i) {
      ActivationSet q, r;
      for (int k = 0; k < 6; ++k) {
        if (rng() % 2) q.push_back(act(k));
        if (rng() % 2) r.push_back(act(k));
      }
      if (q.empty()) continue;
      const double s = composition_score(q, r);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      CHECK((s == 1.0) == (q == r));
    }
  }
}

TEST_SUITE("greedy_compose") {
  TEST_CASE("a query equal to an indexed fragment matches it in one iteration") {
    const auto index = manual_index({{act(1), act(2)}, {act(3), act(4), act(5)}, {act(3), act(4)}});
    const auto r = greedy_compose(query_of({act(3), act(4), act(5)}), index, RetrievalParams{});
    REQUIRE(r.chosen.size() == 1);
    CHECK(r.chosen[0].fragment == 1u);
    CHECK(r.chosen[0].score == 1.0);
    CHECK(r.final_score == 1.0);
    CHECK(r.covered == 3);
  }

  TEST_CASE("uncovered activations give an empty composition") {
    const auto index = manual_index({{act(1)}, {act(2)}});
    const auto r = greedy_compose(query_of({act(7), act(8)}), index, RetrievalParams{});
    CHECK(r.chosen.empty());
    CHECK(r.covered == 0);
    CHECK(r.final_score == 0.0);
  }

  TEST_CASE("empty query throws") {
    const auto index = manual_index({{act(1)}});
    CHECK_THROWS_AS(greedy_compose(query_of({}), index, RetrievalParams{}), EmptyQuery);
  }

  TEST_CASE("three-fragment trace matches a brute-force subset search") {
    const Activation a = act(0), b = act(1), c = act(2), d = act(3);
    const std::vector<ActivationSet> sets{{a, b}, {c}, {a, d}};
    const auto index = manual_index(sets);
    RetrievalParams params;
    params.rho = 0.0;
    const auto q = query_of({a, b, c, d});
    const auto r = greedy_compose(q, index, params);
    REQUIRE(r.chosen.size() == 3);
    CHECK(r.chosen[0].fragment == 0u);
    CHECK(r.chosen[0].score == 0.5);
    // Second step: f1+f2 and f1+f3 both reach 3/4; the smaller id wins.
    CHECK(r.chosen[1].fragment == 1u);
    CHECK(r.chosen[1].score == 0.75);
    CHECK(r.chosen[2].fragment == 2u);
    CHECK(r.covered == 4);

    double best = 0.0;
    for (int mask = 1; mask < 8; ++mask) {
      std::set<Activation> u;
      for (int i = 0; i < 3; ++i) {
        if (mask & (1 << i)) u.insert(sets[i].begin(), sets[i].end());
      }
      best = std::max(best, oracles::h_score(as_set(q.activations), u));
    }
    CHECK(r.final_score == best);
  }

  TEST_CASE("every step picks the best candidate and never stalls") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
      const int nfrag = 1 + static_cast<int>(rng() % 6);
      std::vector<ActivationSet> sets(nfrag);
      for (auto& s : sets) {
        const int n = static_cast<int>(rng() % 8);
        for (int k = 0; k < n; ++k) s.push_back(act(rng() % 16, rng() % 2));
      }
      ActivationSet qs;
      const int qn = 1 + static_cast<int>(rng() % 12);
      for (int k = 0; k < qn; ++k) qs.push_back(act(rng() % 16, rng() % 2));
      const auto index = manual_index(sets);
      const auto q = query_of(qs);
      RetrievalParams params;
      params.rho = (trial % 2) ? 0.0 : 0.25;
      const auto r = greedy_compose(q, index, params);

      const auto fq = as_set(q.activations);
      for (const auto& problem : oracles::greedy_trace_problems(q, index, r)) FAIL_CHECK(problem);
      std::set<Activation> composed;
      std::size_t last_uncovered = fq.size();
      for (const auto& step : r.chosen) {
        const auto& chosen = index.fragments[step.fragment].activations;
        composed.insert(chosen.begin(), chosen.end());
        std::size_t now_uncovered = 0;
        for (const auto& a : fq) now_uncovered += !composed.count(a);
        CHECK(now_uncovered < last_uncovered);
        last_uncovered = now_uncovered;
      }
      CHECK(r.chosen.size() <= std::min<std::size_t>(fq.size(), 16));
      CHECK(r.covered == fq.size() - last_uncovered);
      if (params.rho == 0.0) {
        std::size_t best_single = 0;
        for (const auto& f : index.fragments) best_single = std::max(best_single, oracles::coverage(q.activations, f.activations));
        CHECK(r.covered >= best_single);
      }
    }
  }

  TEST_CASE("coverage never shrinks as fragments are added") {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ActivationSet> sets(5);
      for (auto& s : sets) {
        for (int k = 0; k < 5; ++k) s.push_back(act(rng() % 20));
      }
      ActivationSet qs;
      for (int k = 0; k < 10; ++k) qs.push_back(act(rng() % 20));
      const auto index = manual_index(sets);
      RetrievalParams params;
      params.rho = 0.0;
      const auto q = query_of(qs);
      const auto r = greedy_compose(q, index, params);
      std::set<Activation> composed;
      std::size_t prev = 0;
      for (const auto& step : r.chosen) {
        const auto& s = index.fragments[step.fragment].activations;
        composed.insert(s.begin(), s.end());
        std::size_t inter = 0;
        for (const auto& a : q.activations) inter += composed.count(a);
        CHECK(inter >= prev);
        prev = inter;
      }
    }
  }

  TEST_CASE("max_iterations bounds the loop") {
    std::vector<ActivationSet> sets;
    ActivationSet qs;
    for (std::uint32_t k = 0; k < 10; ++k) {
      sets.push_back({act(k)});
      qs.push_back(act(k));
    }
    const auto index = manual_index(sets);
    RetrievalParams params;
    params.rho = 0.0;
    params.max_iterations = 3;
    CHECK(greedy_compose(query_of(qs), index, params).chosen.size() == 3);
  }
}

TEST_SUITE("query_video") {
  TEST_CASE("a library video queried against itself matches every window exactly") {
    const std::vector<LibraryVideo> videos{moving_box_video("lib", 320, 240, 64, {10, 100, 50, 140}, 3)};
    const auto index = build_library(videos, {}, DocumentParams{});
    const auto steps = timestep_average(videos[0].frame_flows, 4);
    const auto matches = query_video(steps, "lib", index, RetrievalParams{});
    int full_frame = 0;
    for (const auto& m : matches) {
      if (m.config.config_id != 0) continue;
      ++full_frame;
      REQUIRE_FALSE(m.result.chosen.empty());
      CHECK(m.result.chosen[0].score == 1.0);
      CHECK(m.result.chosen.size() == 1);
      const auto& top = index.fragments[m.result.chosen[0].fragment];
      CHECK(top.id.video_id == "lib");
      CHECK(top.id.start_t == m.result.query_fragment_id.start_t);
    }
    CHECK(full_frame == 16 - 8 + 1);
  }

  TEST_CASE("a static query produces no query fragments") {
    const std::vector<LibraryVideo> videos{moving_box_video("lib", 320, 240, 40, {10, 100, 50, 140}, 3)};
    const auto index = build_library(videos, {}, DocumentParams{});
    const std::vector<FlowField> steps(10, FlowField(320, 240));
    CHECK(query_video(steps, "q", index, RetrievalParams{}).empty());
  }

  TEST_CASE("motion confined to a quadrant is matched better by a quadrant configuration") {
    const std::vector<LibraryVideo> videos{moving_box_video("lib", 320, 240, 48, {20, 80, 60, 120}, 4)};
    const auto index = build_library(videos, {}, DocumentParams{}, false);
    // Same motion at half scale inside the top-right quadrant.
    const auto query = moving_box_video("q", 320, 240, 48, {170, 40, 190, 60}, 2);
    const auto steps = timestep_average(query.frame_flows, 4);
    const auto matches = query_video(steps, "q", index, RetrievalParams{});
    std::map<int, double> full, best_quadrant;
    for (const auto& m : matches) {
      const int s = m.result.query_fragment_id.start_t;
      if (m.config.level == 1) full[s] = m.result.final_score;
      if (m.config.level == 2) best_quadrant[s] = std::max(best_quadrant[s], m.result.final_score);
    }
    REQUIRE_FALSE(best_quadrant.empty());
    bool some_better = false;
    for (const auto& [s, q] : best_quadrant) {
      CHECK(q >= full[s]);
      some_better = some_better || q > full[s];
    }
    CHECK(some_better);
  }

  TEST_CASE("query geometry must fit the library grid") {
    const std::vector<LibraryVideo> videos{moving_box_video("lib", 320, 240, 32, {10, 100, 50, 140}, 3)};
    const auto index = build_library(videos, {}, DocumentParams{});
    CHECK(query_document_params(index, 320, 240).cube_base == 20);
    CHECK(query_document_params(index, 640, 480).cube_base == 40);
    CHECK_THROWS_AS(query_document_params(index, 320, 320), GeometryError);
    CHECK_THROWS_AS(query_document_params(index, 160, 120), GeometryError);  // 10 px cubes cannot split by 4
  }
}
