#include "search_tracker/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.get();
  while (in) {
    if (c == '#') {
      while (in && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (!in || !std::isdigit(c)) {
    throw FormatError("malformed PNM header in " + path.string());
  }
  long value = 0;
  while (in && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > (1 << 24)) throw FormatError("PNM header value too large in " + path.string());
    c = in.get();
  }
  // `c` is the single whitespace byte that terminates the token.
  return static_cast<int>(value);
}

bool is_frame_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".pgm" || ext == ".ppm";
}

}  // namespace

RgbImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file: " + path.string());
  }
  const bool color = magic[1] == '6';
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw FormatError("unsupported PNM geometry or depth in " + path.string());
  }
  const std::size_t channels = color ? 3 : 1;
  std::vector<char> raw(static_cast<std::size_t>(width) * height * channels);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError("truncated pixel data in " + path.string());
  }
  RgbImage image(width, height);
  const double scale = 255.0 / maxval;
  for (std::size_t i = 0; i < static_cast<std::size_t>(width) * height; ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const auto v = static_cast<unsigned char>(raw[i * channels + (color ? ch : 0)]);
      image.data[i * 3 + ch] =
          maxval == 255 ? v : static_cast<std::uint8_t>(std::min(255.0, v * scale + 0.5));
    }
  }
  return image;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

FrameSequence load_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError("not a frame directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  if (files.size() < 2) {
    throw FormatError("need at least two frames in " + dir.string());
  }

  FrameSequence seq;
  seq.video_id = dir.filename().string();
  if (seq.video_id.empty()) seq.video_id = dir.parent_path().filename().string();
  for (const auto& file : files) {
    auto image = read_pnm(file);
    if (!seq.frames.empty() &&
        (image.width != seq.width || image.height != seq.height)) {
      throw DimensionMismatch("frame " + file.filename().string() + " is " +
                              std::to_string(image.width) + "x" +
                              std::to_string(image.height) + ", expected " +
                              std::to_string(seq.width) + "x" +
                              std::to_string(seq.height));
    }
    seq.width = image.width;
    seq.height = image.height;
    seq.frames.push_back(std::move(image));
  }
  return seq;
}

GrayImage to_gray(const RgbImage& image) {
  GrayImage gray(image.width, image.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto* p = image.data.data() + i * 3;
    gray.data[i] = static_cast<float>((0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0);
  }
  return gray;
}

RgbImage flip_image(const RgbImage& image, FlipAxis axis) {
  RgbImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const int sx = axis == FlipAxis::horizontal ? image.width - 1 - x : x;
      const int sy = axis == FlipAxis::vertical ? image.height - 1 - y : y;
      std::copy_n(image.pixel(sx, sy), 3, out.pixel(x, y));
    }
  }
  return out;
}

RgbImage crop_image(const RgbImage& image, int x0, int y0, int w, int h) {
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    std::copy_n(image.pixel(x0, y0 + y), static_cast<std::size_t>(w) * 3, out.pixel(0, y));
  }
  return out;
}

}  // namespace search_tracker
