#include "search_tracker/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument("config: " + message);
}

bool on_grid(double value, double spacing, double max) {
  const double k = std::round(value / spacing);
  return value >= 0.0 && value <= max && std::abs(k * spacing - value) < 1e-9;
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

json config_json(const RunConfig& c) {
  return json{{"cube_base", c.document.cube_base},
              {"step", c.document.step},
              {"fragment_length", c.document.fragment_length},
              {"mag_threshold", c.document.mag_threshold},
              {"vote_threshold", c.document.vote_threshold},
              {"hs_smoothness", c.flow.smoothness},
              {"hs_iterations", c.flow.iterations},
              {"rho", c.retrieval.rho},
              {"max_iterations", c.retrieval.max_iterations},
              {"alpha", c.warp.alpha},
              {"warp_bins", c.warp.bins},
              {"warp_batches", c.warp.batches},
              {"nms_iou", c.nms.iou_threshold},
              {"nms_min_density", c.nms.min_density},
              {"beta", c.association.beta},
              {"gate_distance", c.association.gate_distance},
              {"min_coverage", c.min_coverage},
              {"min_match_score", c.min_match_score},
              {"smoothing_half_window", c.smoothing_half_window},
              {"overlap_threshold", c.overlap_threshold},
              {"distance_threshold", c.distance_threshold},
              {"include_flips", c.include_flips},
              {"seed", c.seed}};
}

Track shift_track(Track t, int dx, int dy) {
  for (auto& b : t.boxes) b = {b.left + dx, b.top + dy, b.right + dx, b.bottom + dy};
  return t;
}

auto candidate_key(const CandidateBox& c) {
  return std::tie(c.frame, c.box, c.result_box, c.source_track, c.source_frame, c.transform.scale_x,
                  c.transform.scale_y, c.transform.offset_x, c.transform.offset_y);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_curve(const std::filesystem::path& path, const std::vector<double>& thresholds,
                 const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "threshold,precision\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i) out << thresholds[i] << ',' << values[i] << '\n';
}

}  // namespace

void RunConfig::validate() const {
  require(document.cube_base > 0, "cube_base must be positive");
  require(document.step > 0, "step must be positive");
  require(document.fragment_length > 0, "fragment_length must be positive");
  require(document.mag_threshold >= 0.0, "mag_threshold must be non-negative");
  require(document.vote_threshold >= 0.0 && document.vote_threshold <= 1.0, "vote_threshold must lie in [0, 1]");
  require(flow.smoothness > 0.0, "hs_smoothness must be positive");
  require(flow.iterations > 0, "hs_iterations must be positive");
  require(retrieval.rho >= 0.0 && retrieval.rho < 1.0, "rho must lie in [0, 1)");
  require(retrieval.max_iterations > 0, "max_iterations must be positive");
  require(warp.alpha > 0.0, "alpha must be positive");
  require(warp.bins > 0, "warp_bins must be positive");
  require(warp.batches > 0, "warp_batches must be positive");
  require(nms.iou_threshold >= 0.0 && nms.iou_threshold <= 1.0, "nms_iou must lie in [0, 1]");
  require(nms.min_density >= 0.0, "nms_min_density must be non-negative");
  require(association.beta >= 0.0, "beta must be non-negative");
  require(association.gate_distance > 0.0, "gate_distance must be positive");
  require(min_coverage >= 0.0 && min_coverage <= 1.0, "min_coverage must lie in [0, 1]");
  require(min_match_score >= 0.0 && min_match_score <= 1.0, "min_match_score must lie in [0, 1]");
  require(smoothing_half_window >= 0, "smoothing_half_window must be non-negative");
  require(on_grid(overlap_threshold, 0.05, 1.0), "overlap_threshold must be a multiple of 0.05 in [0, 1]");
  require(on_grid(distance_threshold, 1.0, 50.0), "distance_threshold must be an integer in [0, 50]");
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  RunConfig c;
  const json known = config_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InvalidArgument("config: unknown key '" + key + "'");
  }
  try {
    read_key(j, "cube_base", c.document.cube_base);
    read_key(j, "step", c.document.step);
    read_key(j, "fragment_length", c.document.fragment_length);
    read_key(j, "mag_threshold", c.document.mag_threshold);
    read_key(j, "vote_threshold", c.document.vote_threshold);
    read_key(j, "hs_smoothness", c.flow.smoothness);
    read_key(j, "hs_iterations", c.flow.iterations);
    read_key(j, "rho", c.retrieval.rho);
    read_key(j, "max_iterations", c.retrieval.max_iterations);
    read_key(j, "alpha", c.warp.alpha);
    read_key(j, "warp_bins", c.warp.bins);
    read_key(j, "warp_batches", c.warp.batches);
    read_key(j, "nms_iou", c.nms.iou_threshold);
    read_key(j, "nms_min_density", c.nms.min_density);
    read_key(j, "beta", c.association.beta);
    read_key(j, "gate_distance", c.association.gate_distance);
    read_key(j, "min_coverage", c.min_coverage);
    read_key(j, "min_match_score", c.min_match_score);
    read_key(j, "smoothing_half_window", c.smoothing_half_window);
    read_key(j, "overlap_threshold", c.overlap_threshold);
    read_key(j, "distance_threshold", c.distance_threshold);
    read_key(j, "include_flips", c.include_flips);
    read_key(j, "seed", c.seed);
  } catch (const json::type_error& e) {
    throw FormatError(std::string("config value has the wrong type: ") + e.what());
  }
  c.warp.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

std::string run_config_to_json(const RunConfig& config) { return config_json(config).dump(2); }

PreparedVideo prepare_video(const FrameSequence& frames, std::vector<FlowField> flows, const RunConfig& config) {
  if (frames.frames.empty()) throw EmptyInput("video '" + frames.video_id + "' has no frames");
  if (flows.empty()) flows = compute_sequence_flow(frames, config.flow);
  if (flows.size() != frames.frames.size()) {
    throw DimensionMismatch("video '" + frames.video_id + "' has " + std::to_string(frames.frames.size()) +
                            " frames but " + std::to_string(flows.size()) + " flow fields");
  }
  for (const auto& f : flows) {
    if (f.width != frames.width || f.height != frames.height) {
      throw DimensionMismatch("flow size differs from frame size in '" + frames.video_id + "'");
    }
  }
  PreparedVideo out;
  out.crop = valid_crop(frames.width, frames.height, config.document.cube_base);
  const auto& r = out.crop;
  out.frames.video_id = frames.video_id;
  out.frames.width = r.width;
  out.frames.height = r.height;
  out.frames.fps = frames.fps;
  for (const auto& img : frames.frames) out.frames.frames.push_back(crop_image(img, r.x, r.y, r.width, r.height));
  for (const auto& f : flows) out.flows.push_back(crop_flow(f, r.x, r.y, r.width, r.height));
  return out;
}

PreparedVideo load_video(const std::filesystem::path& frame_dir, const std::filesystem::path& flow_dir,
                         const RunConfig& config) {
  FrameSequence frames = load_frames(frame_dir);
  std::vector<FlowField> flows;
  if (!flow_dir.empty()) flows = read_flow_dir(flow_dir);
  return prepare_video(frames, std::move(flows), config);
}

LibraryIndex build_library_from_videos(const std::vector<PreparedVideo>& videos,
                                       const std::vector<AnnotationRow>& annotations, const RunConfig& config) {
  config.validate();
  std::vector<LibraryVideo> library;
  std::map<std::string, Region> crops;
  for (const auto& v : videos) {
    library.push_back({v.frames.video_id, v.frames.width, v.frames.height, v.flows});
    crops[v.frames.video_id] = v.crop;
  }
  std::vector<AnnotationRow> shifted;
  shifted.reserve(annotations.size());
  for (auto row : annotations) {
    auto it = crops.find(row.video_id);
    if (it != crops.end()) {
      const auto& r = it->second;
      row.box = clamp_box({row.box.left - r.x, row.box.top - r.y, row.box.right - r.x, row.box.bottom - r.y},
                          r.width, r.height);
      if (!row.box.valid()) continue;
    }
    shifted.push_back(std::move(row));
  }
  return build_library(library, shifted, config.document, config.include_flips);
}

LibraryIndex build_library_from_dir(const std::filesystem::path& videos_dir,
                                    const std::vector<AnnotationRow>& annotations, const RunConfig& config) {
  if (!std::filesystem::is_directory(videos_dir)) {
    throw FormatError("video directory " + videos_dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(videos_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw EmptyInput("no video directories under " + videos_dir.string());
  std::vector<PreparedVideo> videos;
  for (const auto& dir : dirs) {
    bool has_flow = false;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().extension() == ".flo") has_flow = true;
    }
    videos.push_back(load_video(dir, has_flow ? dir : std::filesystem::path{}, config));
  }
  return build_library_from_videos(videos, annotations, config);
}

TrackingResult track_query(const PreparedVideo& query, const LibraryIndex& index, const RunConfig& config) {
  config.validate();
  TrackingResult out;
  const int frame_count = static_cast<int>(query.frames.frames.size());
  const int step = index.params.step;
  const auto step_flows = timestep_average(query.flows, step);
  if (step_flows.empty()) return out;
  std::vector<MagnitudeField> step_mags;
  step_mags.reserve(step_flows.size());
  for (const auto& f : step_flows) step_mags.push_back(magnitude(f));
  const int steps = static_cast<int>(step_mags.size());
  auto mag_for_frame = [&](int frame) -> const MagnitudeField& {
    return step_mags[static_cast<std::size_t>(std::min(frame / step, steps - 1))];
  };

  const auto matches = query_video(step_flows, query.frames.video_id, index, config.retrieval);
  out.stats.matches = matches.size();

  std::vector<CandidateBox> candidates;
  for (const auto& m : matches) {
    const double coverage = static_cast<double>(m.result.covered) / static_cast<double>(m.result.query_size);
    if (coverage < config.min_coverage || m.result.final_score < config.min_match_score) continue;
    auto boxes = transfer_boxes(m.result, index, m.config, frame_count);
    candidates.insert(candidates.end(), std::make_move_iterator(boxes.begin()),
                      std::make_move_iterator(boxes.end()));
  }
  // Identical transfers warp identically; keep one, with the best match score.
  std::sort(candidates.begin(), candidates.end(), [](const CandidateBox& a, const CandidateBox& b) {
    const auto ka = candidate_key(a);
    const auto kb = candidate_key(b);
    if (ka != kb) return ka < kb;
    return a.match_score > b.match_score;
  });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const CandidateBox& a, const CandidateBox& b) {
                                 return candidate_key(a) == candidate_key(b);
                               }),
                   candidates.end());
  out.stats.candidates = candidates.size();

  std::vector<std::vector<CandidateBox>> per_frame(static_cast<std::size_t>(frame_count));
  std::uint64_t ordinal = 0;
  for (auto& c : candidates) {
    const auto* field = index.flow_at(c.source_track.video_id, c.source_track.flip, c.source_frame);
    if (field != nullptr) {
      WarpParams wp = config.warp;
      wp.seed = splitmix64(config.seed ^ splitmix64(ordinal++));
      c.box = warp_box(c.box, WarpReference{field, c.result_box, c.transform}, mag_for_frame(c.frame), wp);
    }
    per_frame[static_cast<std::size_t>(c.frame)].push_back(std::move(c));
  }

  std::vector<std::vector<BoundingBox>> detections(static_cast<std::size_t>(frame_count));
  for (int f = 0; f < frame_count; ++f) {
    auto& frame_candidates = per_frame[static_cast<std::size_t>(f)];
    if (frame_candidates.empty()) continue;
    for (const auto& kept : nms(frame_candidates, mag_for_frame(f), config.nms)) {
      detections[static_cast<std::size_t>(f)].push_back(kept.box);
    }
    out.stats.kept += detections[static_cast<std::size_t>(f)].size();
  }

  auto tracks = link_tracks(detections, query.frames.frames, config.association);
  tracks = smooth_tracks(tracks, config.smoothing_half_window, query.frames.width, query.frames.height);
  for (auto& t : tracks) out.tracks.push_back(shift_track(std::move(t), query.crop.x, query.crop.y));
  return out;
}

EvalSummary evaluate_videos(const std::map<std::string, std::vector<Track>>& gt,
                            const std::map<std::string, std::vector<Track>>& hyps, EvalMode mode,
                            const RunConfig& config, const std::filesystem::path& report_path) {
  if (gt.empty()) throw EmptyInput("ground truth contains no tracks");
  const std::vector<Track> none;
  EvalSummary summary;
  json report{{"mode", mode == EvalMode::single ? "single" : "clear"}};
  json videos = json::array();
  std::vector<double> op_curve, dp_curve, op_grid, dp_grid;
  double cle_sum = 0.0;
  int cle_videos = 0;

  for (const auto& [video, gt_tracks] : gt) {
    auto it = hyps.find(video);
    const auto& hyp_tracks = it == hyps.end() ? none : it->second;
    json entry{{"video_id", video}};
    if (mode == EvalMode::single) {
      const auto s = evaluate_single_target(gt_tracks, hyp_tracks);
      const double op = s.overlap_precision_at(config.overlap_threshold);
      const double dp = s.distance_precision_at(config.distance_threshold);
      entry["gt_tracks"] = s.gt_ids;
      entry["selected_hypotheses"] = s.hyp_ids;
      entry["mean_voc"] = s.mean_voc;
      entry["mean_cle"] = number_or_null(s.mean_cle);
      entry["overlap_precision"] = op;
      entry["distance_precision"] = dp;
      summary.overlap_precision += op;
      summary.distance_precision += dp;
      summary.mean_voc += s.mean_voc;
      if (std::isfinite(s.mean_cle)) {
        cle_sum += s.mean_cle;
        ++cle_videos;
      }
      if (op_curve.empty()) {
        op_grid = s.overlap_thresholds;
        dp_grid = s.distance_thresholds;
        op_curve.assign(op_grid.size(), 0.0);
        dp_curve.assign(dp_grid.size(), 0.0);
      }
      for (std::size_t i = 0; i < op_curve.size(); ++i) op_curve[i] += s.overlap_precision[i];
      for (std::size_t i = 0; i < dp_curve.size(); ++i) dp_curve[i] += s.distance_precision[i];
    } else {
      const auto r = clear_mot(gt_tracks, hyp_tracks, config.overlap_threshold);
      entry["mota"] = r.mota;
      entry["motp"] = r.motp;
      entry["gt_total"] = r.gt_total;
      entry["matches"] = r.matches;
      entry["misses"] = r.misses;
      entry["false_positives"] = r.false_positives;
      entry["id_switches"] = r.id_switches;
      summary.mota += r.mota;
      summary.motp += r.motp;
    }
    videos.push_back(std::move(entry));
  }

  const double n = static_cast<double>(gt.size());
  summary.overlap_precision /= n;
  summary.distance_precision /= n;
  summary.mean_voc /= n;
  summary.mean_cle = cle_videos > 0 ? cle_sum / cle_videos : std::numeric_limits<double>::quiet_NaN();
  summary.mota /= n;
  summary.motp /= n;

  if (mode == EvalMode::single) {
    report["summary"] = {{"mean_voc", summary.mean_voc},
                         {"mean_cle", number_or_null(summary.mean_cle)},
                         {"overlap_threshold", config.overlap_threshold},
                         {"overlap_precision", summary.overlap_precision},
                         {"distance_threshold", config.distance_threshold},
                         {"distance_precision", summary.distance_precision}};
  } else {
    report["summary"] = {{"mota", summary.mota}, {"motp", summary.motp}};
  }
  report["videos"] = std::move(videos);

  if (report_path.has_parent_path()) std::filesystem::create_directories(report_path.parent_path());
  std::ofstream out(report_path);
  if (!out) throw Error("cannot write " + report_path.string());
  out << report.dump(2) << '\n';
  if (mode == EvalMode::single) {
    for (auto& v : op_curve) v /= n;
    for (auto& v : dp_curve) v /= n;
    const auto dir = report_path.parent_path();
    write_curve(dir / "overlap_precision.csv", op_grid, op_curve);
    write_curve(dir / "distance_precision.csv", dp_grid, dp_curve);
  }
  return summary;
}

std::vector<SweepRow> run_sweep(SweepParam param, std::span<const double> values, const LibraryIndex& index,
                                const PreparedVideo& query, const std::vector<Track>& gt,
                                const RunConfig& config) {
  if (values.empty()) throw InvalidArgument("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double value : values) {
    RunConfig run = config;
    TrackingResult result;
    if (param == SweepParam::gamma) {
      if (!(value > 0.0 && value <= 1.0)) throw InvalidArgument("gamma must lie in (0, 1]");
      result = track_query(query, sample_sublibrary(index, value, config.seed), run);
    } else {
      run.warp.alpha = value;
      result = track_query(query, index, run);
    }
    const auto s = evaluate_single_target(gt, result.tracks);
    rows.push_back({value, s.overlap_precision_at(config.overlap_threshold),
                    s.distance_precision_at(config.distance_threshold)});
  }
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "value,overlap_precision,distance_precision\n";
  for (const auto& r : rows) out << r.value << ',' << r.overlap_precision << ',' << r.distance_precision << '\n';
}

}  // namespace search_tracker
