#include "search_tracker/library_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

using json = nlohmann::json;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kFragmentForward = "fragment_forward.bin";
constexpr const char* kFragmentInverse = "fragment_inverse.bin";
constexpr const char* kFlowFields = "flow_fields.bin";
constexpr const char* kTrackForward = "track_forward.bin";
constexpr const char* kTrackInverse = "track_inverse.bin";

FlipAxis axis_of(FlipVariant flip) {
  return flip == FlipVariant::horizontal ? FlipAxis::horizontal : FlipAxis::vertical;
}

FlipVariant flip_from(std::uint32_t raw, detail::ByteReader& reader) {
  if (raw > 2) reader.fail("bad flip variant");
  return static_cast<FlipVariant>(raw);
}

bool same_params(const DocumentParams& a, const DocumentParams& b) {
  return a.cube_base == b.cube_base && a.step == b.step && a.fragment_length == b.fragment_length &&
         a.mag_threshold == b.mag_threshold && a.vote_threshold == b.vote_threshold;
}

// Fills the track inverse table for fragments of one (video, flip).
void link_tracks_to_fragments(LibraryIndex& index) {
  index.track_inverse.assign(index.fragments.size(), {});
  const int step = index.params.step;
  const int span = index.params.fragment_length * step;
  for (std::size_t i = 0; i < index.fragments.size(); ++i) {
    const auto& id = index.fragments[i].id;
    const int begin = id.start_t * step;
    const int end = begin + span;
    auto it = index.tracks.lower_bound(TrackKey{id.video_id, id.flip, ""});
    for (; it != index.tracks.end() && it->first.video_id == id.video_id && it->first.flip == id.flip;
         ++it) {
      const Track& t = it->second;
      if (t.first_frame < end && t.last_frame() >= begin) index.track_inverse[i].push_back(it->first);
    }
  }
}

}  // namespace

const VideoInfo* LibraryIndex::find_video(const std::string& video_id) const {
  auto it = std::lower_bound(videos.begin(), videos.end(), video_id,
                             [](const VideoInfo& v, const std::string& id) { return v.video_id < id; });
  return it != videos.end() && it->video_id == video_id ? &*it : nullptr;
}

long LibraryIndex::find_fragment(const FragmentId& id) const {
  auto it = std::lower_bound(fragments.begin(), fragments.end(), id,
                             [](const Fragment& f, const FragmentId& key) { return f.id < key; });
  return it != fragments.end() && it->id == id ? static_cast<long>(it - fragments.begin()) : -1;
}

const MagnitudeField* LibraryIndex::flow_at(const std::string& video_id, FlipVariant flip,
                                            int frame) const {
  auto it = flow_fields.find(FlowKey{video_id, flip, frame / params.step});
  return it == flow_fields.end() ? nullptr : &it->second;
}

void rebuild_inverse(LibraryIndex& index) {
  index.inverse.clear();
  for (std::size_t i = 0; i < index.fragments.size(); ++i) {
    for (const auto& a : index.fragments[i].activations) {
      index.inverse[a].push_back(static_cast<std::uint32_t>(i));
    }
  }
}

LibraryIndex build_library(std::span<const LibraryVideo> videos,
                           const std::vector<AnnotationRow>& annotations,
                           const DocumentParams& params, bool include_flips) {
  LibraryIndex index;
  index.params = params;

  std::set<std::string> known;
  for (const auto& v : videos) {
    if (!known.insert(v.video_id).second) throw InvalidArgument("duplicate video id " + v.video_id);
  }
  auto grouped = group_tracks(annotations);
  for (const auto& [video_id, tracks] : grouped) {
    if (!known.contains(video_id)) {
      throw ReferenceError("annotations reference missing video '" + video_id + "'");
    }
  }

  for (const auto& video : videos) {
    const int frame_count = static_cast<int>(video.frame_flows.size());
    if (frame_count == 0) throw EmptyInput("video " + video.video_id + " has no flow");
    const auto steps = timestep_average(video.frame_flows, params.step);
    const auto config = full_frame_config(video.width, video.height);
    const auto& tracks = grouped[video.video_id];
    for (const auto& t : tracks) {
      if (t.first_frame < 0 || t.last_frame() >= frame_count) {
        throw ReferenceError("track " + video.video_id + "/" + t.track_id +
                             " references frames outside the video");
      }
      for (const auto& b : t.boxes) {
        if (!b.inside(video.width, video.height)) {
          throw ReferenceError("track " + video.video_id + "/" + t.track_id +
                               " has a box outside the frame");
        }
      }
    }

    for (FlipVariant flip : kFlipVariants) {
      if (flip != FlipVariant::original && !include_flips) continue;
      std::vector<FlowField> flipped;
      std::span<const FlowField> source = steps;
      if (flip != FlipVariant::original) {
        flipped = flip_video(steps, axis_of(flip));
        source = flipped;
      }
      const auto doc = build_document(source, config, params);
      if (index.word_count == 0) {
        index.word_count = doc.word_count;
        index.cube_cols = doc.cube_cols;
        index.cube_rows = doc.cube_rows;
      } else if (doc.cube_cols != index.cube_cols || doc.cube_rows != index.cube_rows) {
        throw GeometryError("library video " + video.video_id +
                            " has a different cube grid than the rest of the library");
      }
      for (auto& f : fragmentize(doc, params.fragment_length, video.video_id, flip)) {
        index.fragments.push_back(std::move(f));
      }
      for (int t = 0; t < static_cast<int>(source.size()); ++t) {
        index.flow_fields.emplace(FlowKey{video.video_id, flip, t}, magnitude(source[t]));
      }
      for (const auto& t : tracks) {
        Track stored = flip == FlipVariant::original
                           ? t
                           : flip_track(t, axis_of(flip), video.width, video.height);
        index.tracks.emplace(TrackKey{video.video_id, flip, t.track_id}, std::move(stored));
      }
    }
    index.videos.push_back({video.video_id, video.width, video.height, frame_count,
                            static_cast<int>(steps.size())});
  }

  std::sort(index.videos.begin(), index.videos.end(),
            [](const VideoInfo& a, const VideoInfo& b) { return a.video_id < b.video_id; });
  std::sort(index.fragments.begin(), index.fragments.end(),
            [](const Fragment& a, const Fragment& b) { return a.id < b.id; });
  rebuild_inverse(index);
  link_tracks_to_fragments(index);
  return index;
}

void save_index(const LibraryIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format"] = "search-tracker-index";
  manifest["version"] = kIndexFormatVersion;
  manifest["params"] = {{"cube_base", index.params.cube_base},
                        {"step", index.params.step},
                        {"fragment_length", index.params.fragment_length},
                        {"mag_threshold", index.params.mag_threshold},
                        {"vote_threshold", index.params.vote_threshold}};
  manifest["grid"] = {{"cols", index.cube_cols}, {"rows", index.cube_rows}, {"words", index.word_count}};
  manifest["videos"] = json::array();
  for (const auto& v : index.videos) {
    manifest["videos"].push_back({{"video_id", v.video_id},
                                  {"width", v.width},
                                  {"height", v.height},
                                  {"frames", v.frame_count},
                                  {"time_steps", v.time_steps}});
  }
  manifest["tables"] = {kFragmentForward, kFragmentInverse, kFlowFields, kTrackForward, kTrackInverse};
  {
    std::ofstream out(dir / kManifest);
    if (!out) throw FormatError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
  }

  detail::ByteWriter ff;
  ff.raw("STFF", 4);
  ff.u32(static_cast<std::uint32_t>(index.fragments.size()));
  for (const auto& f : index.fragments) {
    ff.str(f.id.video_id);
    ff.u32(static_cast<std::uint32_t>(f.id.config_id));
    ff.u32(static_cast<std::uint32_t>(f.id.flip));
    ff.u32(static_cast<std::uint32_t>(f.id.start_t));
    ff.u32(static_cast<std::uint32_t>(f.activations.size()));
    for (const auto& a : f.activations) {
      ff.u32(a.word);
      ff.u32(a.time);
    }
  }
  ff.save(dir / kFragmentForward);

  detail::ByteWriter fi;
  fi.raw("STFI", 4);
  fi.u32(static_cast<std::uint32_t>(index.inverse.size()));
  for (const auto& [a, postings] : index.inverse) {
    fi.u32(a.word);
    fi.u32(a.time);
    fi.u32(static_cast<std::uint32_t>(postings.size()));
    for (auto p : postings) fi.u32(p);
  }
  fi.save(dir / kFragmentInverse);

  detail::ByteWriter fl;
  fl.raw("STFL", 4);
  fl.u32(static_cast<std::uint32_t>(index.flow_fields.size()));
  for (const auto& [key, field] : index.flow_fields) {
    fl.str(key.video_id);
    fl.u32(static_cast<std::uint32_t>(key.flip));
    fl.u32(static_cast<std::uint32_t>(key.time_step));
    fl.u32(static_cast<std::uint32_t>(field.width));
    fl.u32(static_cast<std::uint32_t>(field.height));
    for (float m : field.mag) fl.f32(m);
  }
  fl.save(dir / kFlowFields);

  detail::ByteWriter tf;
  tf.raw("STTF", 4);
  tf.u32(static_cast<std::uint32_t>(index.tracks.size()));
  for (const auto& [key, track] : index.tracks) {
    tf.str(key.video_id);
    tf.u32(static_cast<std::uint32_t>(key.flip));
    tf.str(key.track_id);
    tf.i32(track.first_frame);
    tf.u32(static_cast<std::uint32_t>(track.boxes.size()));
    for (const auto& b : track.boxes) {
      tf.i32(b.left);
      tf.i32(b.top);
      tf.i32(b.right);
      tf.i32(b.bottom);
    }
  }
  tf.save(dir / kTrackForward);

  std::map<TrackKey, std::uint32_t> track_pos;
  for (const auto& [key, track] : index.tracks) {
    track_pos.emplace(key, static_cast<std::uint32_t>(track_pos.size()));
  }
  detail::ByteWriter ti;
  ti.raw("STTI", 4);
  ti.u32(static_cast<std::uint32_t>(index.track_inverse.size()));
  for (const auto& keys : index.track_inverse) {
    ti.u32(static_cast<std::uint32_t>(keys.size()));
    for (const auto& k : keys) {
      auto it = track_pos.find(k);
      if (it == track_pos.end()) throw ReferenceError("track inverse names an unknown track");
      ti.u32(it->second);
    }
  }
  ti.save(dir / kTrackInverse);
}

LibraryIndex load_index(const std::filesystem::path& dir) {
  LibraryIndex index;
  json manifest;
  {
    std::ifstream in(dir / kManifest);
    if (!in) throw FormatError("missing manifest in " + dir.string());
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(std::string("corrupt manifest: ") + e.what());
    }
  }
  try {
    if (manifest.at("format").get<std::string>() != "search-tracker-index") {
      throw FormatError("not a search-tracker index: " + dir.string());
    }
    const int version = manifest.at("version").get<int>();
    if (version != kIndexFormatVersion) {
      throw FormatError("index version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kIndexFormatVersion) + ")");
    }
    const auto& p = manifest.at("params");
    index.params.cube_base = p.at("cube_base").get<int>();
    index.params.step = p.at("step").get<int>();
    index.params.fragment_length = p.at("fragment_length").get<int>();
    index.params.mag_threshold = p.at("mag_threshold").get<double>();
    index.params.vote_threshold = p.at("vote_threshold").get<double>();
    index.cube_cols = manifest.at("grid").at("cols").get<int>();
    index.cube_rows = manifest.at("grid").at("rows").get<int>();
    index.word_count = manifest.at("grid").at("words").get<int>();
    for (const auto& v : manifest.at("videos")) {
      index.videos.push_back({v.at("video_id").get<std::string>(), v.at("width").get<int>(),
                              v.at("height").get<int>(), v.at("frames").get<int>(),
                              v.at("time_steps").get<int>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt manifest: ") + e.what());
  }

  {
    detail::ByteReader r(dir / kFragmentForward);
    r.expect_magic("STFF");
    const auto n = r.count(20);
    index.fragments.resize(n);
    for (auto& f : index.fragments) {
      f.id.video_id = r.str();
      f.id.config_id = static_cast<int>(r.u32());
      f.id.flip = flip_from(r.u32(), r);
      f.id.start_t = static_cast<int>(r.u32());
      const auto m = r.count(8);
      f.activations.resize(m);
      for (auto& a : f.activations) {
        a.word = r.u32();
        a.time = r.u32();
      }
    }
    r.finish();
  }
  {
    detail::ByteReader r(dir / kFragmentInverse);
    r.expect_magic("STFI");
    const auto n = r.count(12);
    for (std::uint32_t i = 0; i < n; ++i) {
      Activation a{r.u32(), r.u32()};
      const auto m = r.count(4);
      std::vector<std::uint32_t> postings(m);
      for (auto& p : postings) {
        p = r.u32();
        if (p >= index.fragments.size()) r.fail("posting out of range");
      }
      index.inverse.emplace(a, std::move(postings));
    }
    r.finish();
  }
  {
    detail::ByteReader r(dir / kFlowFields);
    r.expect_magic("STFL");
    const auto n = r.count(20);
    for (std::uint32_t i = 0; i < n; ++i) {
      FlowKey key;
      key.video_id = r.str();
      key.flip = flip_from(r.u32(), r);
      key.time_step = static_cast<int>(r.u32());
      const auto w = static_cast<int>(r.u32());
      const auto h = static_cast<int>(r.u32());
      if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) r.fail("bad flow field size");
      MagnitudeField field(w, h);
      for (auto& m : field.mag) m = r.f32();
      index.flow_fields.emplace(std::move(key), std::move(field));
    }
    r.finish();
  }
  std::vector<TrackKey> track_keys;
  {
    detail::ByteReader r(dir / kTrackForward);
    r.expect_magic("STTF");
    const auto n = r.count(20);
    for (std::uint32_t i = 0; i < n; ++i) {
      TrackKey key;
      key.video_id = r.str();
      key.flip = flip_from(r.u32(), r);
      key.track_id = r.str();
      Track t;
      t.track_id = key.track_id;
      t.first_frame = r.i32();
      const auto m = r.count(16);
      t.boxes.resize(m);
      for (auto& b : t.boxes) b = {r.i32(), r.i32(), r.i32(), r.i32()};
      track_keys.push_back(key);
      index.tracks.emplace(std::move(key), std::move(t));
    }
    r.finish();
  }
  {
    detail::ByteReader r(dir / kTrackInverse);
    r.expect_magic("STTI");
    const auto n = r.count(4);
    if (n != index.fragments.size()) r.fail("row count differs from fragment table");
    index.track_inverse.resize(n);
    for (auto& keys : index.track_inverse) {
      const auto m = r.count(4);
      for (std::uint32_t j = 0; j < m; ++j) {
        const auto pos = r.u32();
        if (pos >= track_keys.size()) r.fail("track reference out of range");
        keys.push_back(track_keys[pos]);
      }
    }
    r.finish();
  }
  return index;
}

LibraryIndex sample_sublibrary(const LibraryIndex& index, double gamma, std::uint64_t seed) {
  if (!(gamma > 0.0) || gamma > 1.0) throw InvalidArgument("gamma must be in (0, 1]");
  const std::size_t n = index.videos.size();
  const auto keep = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
  if (keep >= n) return index;

  // Fisher-Yates with raw engine output so the choice is identical on every platform.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
  std::set<std::string> kept;
  for (std::size_t i = 0; i < keep; ++i) kept.insert(index.videos[order[i]].video_id);

  LibraryIndex out;
  out.params = index.params;
  out.cube_cols = index.cube_cols;
  out.cube_rows = index.cube_rows;
  out.word_count = index.word_count;
  for (const auto& v : index.videos) {
    if (kept.contains(v.video_id)) out.videos.push_back(v);
  }
  for (std::size_t i = 0; i < index.fragments.size(); ++i) {
    if (!kept.contains(index.fragments[i].id.video_id)) continue;
    out.fragments.push_back(index.fragments[i]);
    out.track_inverse.push_back(index.track_inverse[i]);
  }
  for (const auto& [key, field] : index.flow_fields) {
    if (kept.contains(key.video_id)) out.flow_fields.emplace(key, field);
  }
  for (const auto& [key, track] : index.tracks) {
    if (kept.contains(key.video_id)) out.tracks.emplace(key, track);
  }
  rebuild_inverse(out);
  return out;
}

std::vector<std::string> verify_index(const LibraryIndex& index) {
  std::vector<std::string> problems;
  for (std::size_t i = 1; i < index.fragments.size(); ++i) {
    if (!(index.fragments[i - 1].id < index.fragments[i].id)) {
      problems.push_back("fragment table not strictly sorted at " + to_string(index.fragments[i].id));
    }
  }
  // Forward -> inverse.
  std::size_t forward_pairs = 0;
  for (std::size_t i = 0; i < index.fragments.size(); ++i) {
    const auto& f = index.fragments[i];
    if (!std::is_sorted(f.activations.begin(), f.activations.end())) {
      problems.push_back("activations unsorted in " + to_string(f.id));
    }
    for (const auto& a : f.activations) {
      ++forward_pairs;
      if (static_cast<int>(a.time) >= index.params.fragment_length ||
          (index.word_count > 0 && static_cast<int>(a.word) >= index.word_count)) {
        problems.push_back("activation out of bounds in " + to_string(f.id));
      }
      auto it = index.inverse.find(a);
      if (it == index.inverse.end() ||
          !std::binary_search(it->second.begin(), it->second.end(), static_cast<std::uint32_t>(i))) {
        problems.push_back("inverse table misses " + to_string(f.id));
      }
    }
    if (!index.find_video(f.id.video_id)) problems.push_back("fragment of unknown video " + to_string(f.id));
  }
  // Inverse -> forward.
  std::size_t inverse_pairs = 0;
  for (const auto& [a, postings] : index.inverse) {
    if (postings.empty()) problems.push_back("empty posting list");
    if (!std::is_sorted(postings.begin(), postings.end())) problems.push_back("unsorted posting list");
    for (auto p : postings) {
      ++inverse_pairs;
      if (p >= index.fragments.size()) {
        problems.push_back("posting references missing fragment");
        continue;
      }
      const auto& acts = index.fragments[p].activations;
      if (!std::binary_search(acts.begin(), acts.end(), a)) {
        problems.push_back("inverse posting not present in forward row " +
                           to_string(index.fragments[p].id));
      }
    }
  }
  if (forward_pairs != inverse_pairs) problems.push_back("forward/inverse pair counts differ");

  if (index.track_inverse.size() != index.fragments.size()) {
    problems.push_back("track inverse row count differs from fragment count");
  } else {
    for (std::size_t i = 0; i < index.track_inverse.size(); ++i) {
      for (const auto& key : index.track_inverse[i]) {
        if (!index.tracks.contains(key)) {
          problems.push_back("track inverse of " + to_string(index.fragments[i].id) +
                             " references missing track " + key.video_id + "/" + key.track_id);
        }
      }
    }
  }
  for (const auto& [key, track] : index.tracks) {
    if (!index.find_video(key.video_id)) problems.push_back("track of unknown video " + key.video_id);
  }
  for (const auto& [key, field] : index.flow_fields) {
    const auto* v = index.find_video(key.video_id);
    if (!v) {
      problems.push_back("flow field of unknown video " + key.video_id);
    } else if (key.time_step >= v->time_steps || field.width != v->width || field.height != v->height) {
      problems.push_back("flow field inconsistent with video " + key.video_id);
    }
  }
  return problems;
}

bool operator==(const LibraryIndex& a, const LibraryIndex& b) {
  if (!same_params(a.params, b.params) || a.cube_cols != b.cube_cols || a.cube_rows != b.cube_rows ||
      a.word_count != b.word_count || a.videos != b.videos || a.inverse != b.inverse ||
      a.flow_fields != b.flow_fields || a.tracks != b.tracks || a.track_inverse != b.track_inverse ||
      a.fragments.size() != b.fragments.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.fragments.size(); ++i) {
    if (a.fragments[i].id != b.fragments[i].id ||
        a.fragments[i].activations != b.fragments[i].activations) {
      return false;
    }
  }
  return true;
}

}  // namespace search_tracker
