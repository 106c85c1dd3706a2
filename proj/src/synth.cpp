#include "search_tracker/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

struct Texture {
  double fx1, fy1, phase1;
  double fx2, fy2, phase2;

  static Texture random(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> freq(0.15, 0.45);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    return {freq(rng), freq(rng), phase(rng), freq(rng), -freq(rng), phase(rng)};
  }

  // Smooth pattern in [0, 1].
  double at(double x, double y) const {
    return 0.5 + 0.25 * std::sin(fx1 * x + fy1 * y + phase1) + 0.25 * std::sin(fx2 * x + fy2 * y + phase2);
  }
};

std::array<double, 3> hue_color(std::uint8_t hue) {
  const double h = hue / 256.0 * 6.0;
  const double f = h - std::floor(h);
  switch (static_cast<int>(h)) {
    case 0:
      return {1.0, f, 0.0};
    case 1:
      return {1.0 - f, 1.0, 0.0};
    case 2:
      return {0.0, 1.0, f};
    case 3:
      return {0.0, 1.0 - f, 1.0};
    case 4:
      return {f, 0.0, 1.0};
    default:
      return {1.0, 0.0, 1.0 - f};
  }
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L)); }

}  // namespace

SyntheticVideo render_scene(const SyntheticScene& scene) {
  if (scene.width <= 0 || scene.height <= 0 || scene.frames < 2) {
    throw InvalidArgument("synthetic scene needs a positive size and at least two frames");
  }
  std::mt19937_64 rng(scene.seed);
  const Texture background = Texture::random(rng);
  std::vector<Texture> textures;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) textures.push_back(Texture::random(rng));

  SyntheticVideo out;
  out.frames.video_id = scene.video_id;
  out.frames.width = scene.width;
  out.frames.height = scene.height;

  for (int f = 0; f < scene.frames; ++f) {
    RgbImage image(scene.width, scene.height);
    FlowField flow(scene.width, scene.height);
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const auto g = to_byte(0.25 + 0.5 * background.at(x, y));
        auto* p = image.pixel(x, y);
        p[0] = p[1] = p[2] = g;
      }
    }
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
      const auto& obj = scene.objects[k];
      const int left = obj.x0 + obj.vx * f;
      const int top = obj.y0 + obj.vy * f;
      const auto tint = hue_color(obj.hue);
      for (int y = std::max(0, top); y < std::min(scene.height, top + obj.height); ++y) {
        for (int x = std::max(0, left); x < std::min(scene.width, left + obj.width); ++x) {
          const double t = 0.35 + 0.65 * textures[k].at(x - left, y - top);
          auto* p = image.pixel(x, y);
          for (int c = 0; c < 3; ++c) p[c] = to_byte(t * (0.3 + 0.7 * tint[c]));
          flow.u[flow.index(x, y)] = static_cast<float>(obj.vx);
          flow.v[flow.index(x, y)] = static_cast<float>(obj.vy);
        }
      }
      const BoundingBox box = clamp_box({left - scene.annotation_margin, top - scene.annotation_margin,
                                         left + obj.width + scene.annotation_margin,
                                         top + obj.height + scene.annotation_margin},
                                        scene.width, scene.height);
      const bool visible = left < scene.width && top < scene.height && left + obj.width > 0 &&
                           top + obj.height > 0;
      if (visible && box.valid()) out.annotations.push_back({scene.video_id, obj.track_id, f, box});
    }
    out.frames.frames.push_back(std::move(image));
    out.flows.push_back(std::move(flow));
  }
  std::stable_sort(out.annotations.begin(), out.annotations.end(),
                   [](const AnnotationRow& a, const AnnotationRow& b) { return a.track_id < b.track_id; });
  return out;
}

SyntheticScene named_scenario(const std::string& name, std::uint64_t seed) {
  SyntheticScene scene;
  scene.video_id = name;
  scene.seed = seed;
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::uniform_int_distribution<int> jitter(-8, 8);
  if (name == "moving_square") {
    scene.objects.push_back({"0", 40, 40, 40 + jitter(rng), 92 + jitter(rng), 2, 0, 10});
  } else if (name == "two_movers") {
    scene.objects.push_back({"0", 40, 40, 30 + jitter(rng), 30 + jitter(rng), 2, 0, 10});
    scene.objects.push_back({"1", 40, 40, 250 + jitter(rng), 160 + jitter(rng), -2, 0, 150});
  } else if (name == "occlusion") {
    scene.objects.push_back({"0", 40, 40, 20 + jitter(rng), 96 + jitter(rng), 2, 0, 10});
    scene.objects.push_back({"1", 40, 40, 260 + jitter(rng), 106 + jitter(rng), -2, 0, 150});
  } else {
    throw InvalidArgument("unknown scenario '" + name + "'");
  }
  return scene;
}

void write_synthetic(const SyntheticVideo& video, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char name[64];
  for (std::size_t i = 0; i < video.frames.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%05zu.ppm", i);
    write_ppm(video.frames.frames[i], dir / name);
  }
  for (std::size_t i = 0; i < video.flows.size(); ++i) {
    std::snprintf(name, sizeof(name), "flow_%05zu.flo", i);
    write_flo(video.flows[i], dir / name);
  }
  write_annotation_csv(dir / "annotations.csv", video.annotations);
}

}  // namespace search_tracker
