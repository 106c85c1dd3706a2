#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "search_tracker/annotations.hpp"
#include "search_tracker/errors.hpp"
#include "search_tracker/library_index.hpp"
#include "search_tracker/pipeline.hpp"
#include "search_tracker/synth.hpp"

namespace fs = std::filesystem;
using namespace search_tracker;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitInput = 2;

struct InputError : Error {
  using Error::Error;
};

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw InputError(std::string(what) + " not found: " + path.string());
}

void require_dir(const fs::path& path, const char* what) {
  if (!fs::is_directory(path)) throw InputError(std::string(what) + " not found: " + path.string());
}

RunConfig config_from(const std::string& path) {
  if (path.empty()) return RunConfig{};
  require_file(path, "config file");
  return load_run_config(path);
}

std::vector<AnnotationRow> read_all(const std::vector<std::string>& paths) {
  std::vector<AnnotationRow> rows;
  for (const auto& p : paths) require_file(p, "annotation file");
  for (const auto& p : paths) {
    auto more = read_annotation_csv(p);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  return rows;
}

std::map<std::string, std::vector<Track>> read_tracks(const std::string& path, const char* what) {
  require_file(path, what);
  return group_tracks(read_annotation_csv(path));
}

std::size_t posting_count(const LibraryIndex& index) {
  std::size_t n = 0;
  for (const auto& [activation, postings] : index.inverse) n += postings.size();
  return n;
}

std::size_t track_reference_count(const LibraryIndex& index) {
  std::size_t n = 0;
  for (const auto& refs : index.track_inverse) n += refs.size();
  return n;
}

int cmd_build(const std::string& videos, const std::vector<std::string>& annotations, const std::string& out,
              const std::string& config_path) {
  const RunConfig config = config_from(config_path);
  const auto rows = read_all(annotations);
  require_dir(videos, "video directory");
  const auto index = build_library_from_dir(videos, rows, config);
  save_index(index, out);
  std::printf("videos            %zu\n", index.videos.size());
  std::printf("fragment_forward  %zu fragments\n", index.fragments.size());
  std::printf("fragment_inverse  %zu activations, %zu postings\n", index.inverse.size(), posting_count(index));
  std::printf("flow_fields       %zu fields\n", index.flow_fields.size());
  std::printf("track_forward     %zu tracks\n", index.tracks.size());
  std::printf("track_inverse     %zu references\n", track_reference_count(index));
  return kExitOk;
}

int cmd_track(const std::string& index_dir, const std::string& query, const std::string& out,
              const std::string& flows, const std::string& config_path) {
  const RunConfig config = config_from(config_path);
  require_dir(index_dir, "index directory");
  require_dir(query, "query directory");
  if (!flows.empty()) require_dir(flows, "flow directory");
  const auto index = load_index(index_dir);
  const auto video = load_video(query, flows, config);
  const auto result = track_query(video, index, config);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  write_annotation_csv(out, track_rows(video.frames.video_id, result.tracks));
  std::printf("%zu tracks from %zu matches, %zu candidates, %zu kept boxes\n", result.tracks.size(),
              result.stats.matches, result.stats.candidates, result.stats.kept);
  return kExitOk;
}

int cmd_eval(const std::string& gt_path, const std::string& hyp_path, const std::string& mode,
             const std::string& out, const std::string& config_path) {
  const RunConfig config = config_from(config_path);
  const auto gt = read_tracks(gt_path, "ground truth file");
  const auto hyp = read_tracks(hyp_path, "hypothesis file");
  const auto m = mode == "clear" ? EvalMode::clear : EvalMode::single;
  const auto s = evaluate_videos(gt, hyp, m, config, out);
  if (m == EvalMode::single) {
    std::printf("mean VOC %.4f  OP@%.2f %.4f  DP@%.0fpx %.4f\n", s.mean_voc, config.overlap_threshold,
                s.overlap_precision, config.distance_threshold, s.distance_precision);
  } else {
    std::printf("MOTA %.4f  MOTP %.4f\n", s.mota, s.motp);
  }
  return kExitOk;
}

int cmd_sweep(const std::string& param, const std::vector<double>& values, const std::string& index_dir,
              const std::string& query, const std::string& flows, const std::string& gt_path,
              const std::string& out, const std::string& config_path) {
  const RunConfig config = config_from(config_path);
  require_dir(index_dir, "index directory");
  require_dir(query, "query directory");
  if (!flows.empty()) require_dir(flows, "flow directory");
  const auto gt_all = read_tracks(gt_path, "ground truth file");
  const auto index = load_index(index_dir);
  const auto video = load_video(query, flows, config);
  auto it = gt_all.find(video.frames.video_id);
  if (it == gt_all.end()) {
    if (gt_all.size() != 1) {
      throw InputError("ground truth has no tracks for video '" + video.frames.video_id + "'");
    }
    it = gt_all.begin();
  }
  const auto rows = run_sweep(param == "gamma" ? SweepParam::gamma : SweepParam::alpha, values, index, video,
                              it->second, config);
  write_sweep_csv(out, rows);
  for (const auto& r : rows) {
    std::printf("%s=%g  OP %.4f  DP %.4f\n", param.c_str(), r.value, r.overlap_precision, r.distance_precision);
  }
  return kExitOk;
}

int cmd_synth(const std::string& out, const std::string& scenario, std::uint64_t seed) {
  auto scene = named_scenario(scenario, seed);
  scene.video_id = fs::path(out).filename().string();
  if (scene.video_id.empty()) scene.video_id = scenario;
  write_synthetic(render_scene(scene), out);
  std::printf("wrote %d frames of '%s' to %s\n", scene.frames, scenario.c_str(), out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-retrieval tracker: build libraries, track queries, evaluate and sweep."};
  app.require_subcommand(1);

  std::string config_path;

  std::string videos, out, index_dir, query, flows, gt, hyp, mode = "single", param, scenario;
  std::vector<std::string> annotations;
  std::vector<double> values;
  std::uint64_t seed = 0;

  auto* build = app.add_subcommand("build", "Build and save a library index");
  build->add_option("--videos", videos, "Directory with one subdirectory per library video")->required();
  build->add_option("--annotations", annotations, "Annotation CSV (repeatable)")->required();
  build->add_option("--out", out, "Index directory")->required();
  build->add_option("--config", config_path, "JSON run configuration");

  auto* track = app.add_subcommand("track", "Track objects in a query video");
  track->add_option("--index", index_dir, "Index directory")->required();
  track->add_option("--query", query, "Directory of query frames")->required();
  track->add_option("--out", out, "Output track CSV")->required();
  track->add_option("--flows", flows, "Directory of .flo files, one per frame");
  track->add_option("--config", config_path, "JSON run configuration");

  auto* eval = app.add_subcommand("eval", "Score hypothesis tracks against ground truth");
  eval->add_option("--gt", gt, "Ground truth CSV")->required();
  eval->add_option("--hyp", hyp, "Hypothesis CSV")->required();
  eval->add_option("--mode", mode, "single or clear")->check(CLI::IsMember({"single", "clear"}));
  eval->add_option("--out", out, "Report JSON")->required();
  eval->add_option("--config", config_path, "JSON run configuration");

  auto* sweep = app.add_subcommand("sweep", "Re-run tracking over a list of parameter values");
  sweep->add_option("--param", param, "gamma or alpha")->required()->check(CLI::IsMember({"gamma", "alpha"}));
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--index", index_dir, "Index directory")->required();
  sweep->add_option("--query", query, "Directory of query frames")->required();
  sweep->add_option("--flows", flows, "Directory of .flo files, one per frame");
  sweep->add_option("--gt", gt, "Ground truth CSV for the query")->required();
  sweep->add_option("--out", out, "Output CSV")->default_val("sweep.csv");
  sweep->add_option("--config", config_path, "JSON run configuration");

  auto* synth = app.add_subcommand("synth", "Write a synthetic video with exact flow and annotations");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--scenario", scenario, "Scene preset")
      ->required()
      ->check(CLI::IsMember({"moving_square", "two_movers", "occlusion"}));
  synth->add_option("--seed", seed, "Random seed")->default_val(0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*build) return cmd_build(videos, annotations, out, config_path);
    if (*track) return cmd_track(index_dir, query, out, flows, config_path);
    if (*eval) return cmd_eval(gt, hyp, mode, out, config_path);
    if (*sweep) return cmd_sweep(param, values, index_dir, query, flows, gt, out, config_path);
    if (*synth) return cmd_synth(out, scenario, seed);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ReferenceError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitPipeline;
}
