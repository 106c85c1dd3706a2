#include "search_tracker/flow.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

constexpr std::array<char, 4> kFloMagic = {'P', 'I', 'E', 'H'};

void put_u32(std::vector<char>& out, std::uint32_t value) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    value |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return value;
}

// Neighbourhood average with Horn-Schunck weights (1/6 edge, 1/12 corner),
// replicating the border.
void local_average(const std::vector<float>& src, int w, int h, std::vector<float>& dst) {
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return src[static_cast<std::size_t>(y) * w + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float edges = at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1);
      const float corners =
          at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1);
      dst[static_cast<std::size_t>(y) * w + x] = edges / 6.0f + corners / 12.0f;
    }
  }
}

}  // namespace

FlowField compute_flow(const GrayImage& prev, const GrayImage& next,
                       const HornSchunckParams& params) {
  if (prev.width != next.width || prev.height != next.height) {
    throw DimensionMismatch("flow input images differ in size");
  }
  if (!(params.smoothness > 0.0) || params.iterations < 1) {
    throw InvalidArgument("Horn-Schunck needs smoothness > 0 and iterations >= 1");
  }
  const int w = prev.width;
  const int h = prev.height;
  const std::size_t n = prev.size();

  // Derivatives over the 2x2x2 cube, as in the original formulation.
  std::vector<float> ix(n), iy(n), it(n);
  auto px = [&](const GrayImage& img, int x, int y) {
    return img.at(std::min(x, w - 1), std::min(y, h - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float a00 = px(prev, x, y), a10 = px(prev, x + 1, y);
      const float a01 = px(prev, x, y + 1), a11 = px(prev, x + 1, y + 1);
      const float b00 = px(next, x, y), b10 = px(next, x + 1, y);
      const float b01 = px(next, x, y + 1), b11 = px(next, x + 1, y + 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ix[i] = 0.25f * ((a10 - a00) + (a11 - a01) + (b10 - b00) + (b11 - b01));
      iy[i] = 0.25f * ((a01 - a00) + (a11 - a10) + (b01 - b00) + (b11 - b10));
      it[i] = 0.25f * ((b00 - a00) + (b10 - a10) + (b01 - a01) + (b11 - a11));
    }
  }

  FlowField flow(w, h);
  std::vector<float> ubar(n), vbar(n);
  const auto lambda = static_cast<float>(params.smoothness);
  for (int iter = 0; iter < params.iterations; ++iter) {
    local_average(flow.u, w, h, ubar);
    local_average(flow.v, w, h, vbar);
    for (std::size_t i = 0; i < n; ++i) {
      const float num = ix[i] * ubar[i] + iy[i] * vbar[i] + it[i];
      const float den = lambda + ix[i] * ix[i] + iy[i] * iy[i];
      const float k = num / den;
      flow.u[i] = ubar[i] - ix[i] * k;
      flow.v[i] = vbar[i] - iy[i] * k;
    }
  }
  return flow;
}

std::vector<FlowField> compute_sequence_flow(const FrameSequence& frames,
                                             const HornSchunckParams& params) {
  if (frames.frames.size() < 2) throw EmptyInput("need at least two frames for flow");
  std::vector<FlowField> flows;
  flows.reserve(frames.frames.size());
  GrayImage prev = to_gray(frames.frames.front());
  for (std::size_t i = 1; i < frames.frames.size(); ++i) {
    GrayImage next = to_gray(frames.frames[i]);
    flows.push_back(compute_flow(prev, next, params));
    prev = std::move(next);
  }
  flows.push_back(flows.back());
  return flows;
}

FlowField read_flo(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw FormatError("truncated .flo header: " + path.string());
  if (!std::equal(kFloMagic.begin(), kFloMagic.end(), bytes.begin())) {
    throw FormatError("bad .flo magic in " + path.string());
  }
  const auto w = static_cast<std::int32_t>(get_u32(bytes.data() + 4));
  const auto h = static_cast<std::int32_t>(get_u32(bytes.data() + 8));
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) {
    throw FormatError("implausible .flo dimensions in " + path.string());
  }
  const std::size_t count = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 12 + count * 8) {
    throw FormatError("truncated or oversized .flo payload in " + path.string());
  }
  FlowField field(w, h);
  const char* p = bytes.data() + 12;
  for (std::size_t i = 0; i < count; ++i) {
    field.u[i] = std::bit_cast<float>(get_u32(p + i * 8));
    field.v[i] = std::bit_cast<float>(get_u32(p + i * 8 + 4));
  }
  return field;
}

void write_flo(const FlowField& field, const std::filesystem::path& path) {
  std::vector<char> bytes(kFloMagic.begin(), kFloMagic.end());
  bytes.reserve(12 + field.u.size() * 8);
  put_u32(bytes, static_cast<std::uint32_t>(field.width));
  put_u32(bytes, static_cast<std::uint32_t>(field.height));
  for (std::size_t i = 0; i < field.u.size(); ++i) {
    put_u32(bytes, std::bit_cast<std::uint32_t>(field.u[i]));
    put_u32(bytes, std::bit_cast<std::uint32_t>(field.v[i]));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<FlowField> read_flow_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw FormatError("not a flow directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".flo") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  std::vector<FlowField> flows;
  flows.reserve(files.size());
  for (const auto& file : files) {
    flows.push_back(read_flo(file));
    if (flows.back().width != flows.front().width || flows.back().height != flows.front().height) {
      throw DimensionMismatch("flow " + file.filename().string() + " differs in size");
    }
  }
  return flows;
}

std::vector<FlowField> timestep_average(std::span<const FlowField> flows, int step) {
  if (flows.empty()) throw EmptyInput("timestep_average of an empty flow list");
  if (step < 1) throw InvalidArgument("time step must be >= 1");
  const int w = flows.front().width;
  const int h = flows.front().height;
  const std::size_t steps = flows.size() / static_cast<std::size_t>(step);
  std::vector<FlowField> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    FlowField avg(w, h);
    for (int k = 0; k < step; ++k) {
      const auto& f = flows[t * step + k];
      if (f.width != w || f.height != h) throw DimensionMismatch("flow fields differ in size");
      for (std::size_t i = 0; i < avg.u.size(); ++i) {
        avg.u[i] += f.u[i];
        avg.v[i] += f.v[i];
      }
    }
    const float inv = 1.0f / static_cast<float>(step);
    for (std::size_t i = 0; i < avg.u.size(); ++i) {
      avg.u[i] *= inv;
      avg.v[i] *= inv;
    }
    out.push_back(std::move(avg));
  }
  return out;
}

MagnitudeField magnitude(const FlowField& field) {
  MagnitudeField out(field.width, field.height);
  for (std::size_t i = 0; i < out.mag.size(); ++i) out.mag[i] = std::hypot(field.u[i], field.v[i]);
  return out;
}

FlowField flip_flow(const FlowField& field, FlipAxis axis) {
  FlowField out(field.width, field.height);
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const int sx = axis == FlipAxis::horizontal ? field.width - 1 - x : x;
      const int sy = axis == FlipAxis::vertical ? field.height - 1 - y : y;
      const auto src = field.index(sx, sy);
      const auto dst = out.index(x, y);
      out.u[dst] = axis == FlipAxis::horizontal ? -field.u[src] : field.u[src];
      out.v[dst] = axis == FlipAxis::vertical ? -field.v[src] : field.v[src];
    }
  }
  return out;
}

MagnitudeField flip_magnitude(const MagnitudeField& field, FlipAxis axis) {
  MagnitudeField out(field.width, field.height);
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const int sx = axis == FlipAxis::horizontal ? field.width - 1 - x : x;
      const int sy = axis == FlipAxis::vertical ? field.height - 1 - y : y;
      out.at(x, y) = field.at(sx, sy);
    }
  }
  return out;
}

FlowField crop_flow(const FlowField& field, int x0, int y0, int w, int h) {
  FlowField out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.u[out.index(x, y)] = field.u[field.index(x0 + x, y0 + y)];
      out.v[out.index(x, y)] = field.v[field.index(x0 + x, y0 + y)];
    }
  }
  return out;
}

}  // namespace search_tracker
