#include "search_tracker/annotations.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "search_tracker/errors.hpp"

namespace search_tracker {
namespace {

constexpr const char* kHeader = "video_id,track_id,frame,left,top,right,bottom";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

int parse_int(const std::string& text, const std::filesystem::path& path, int line_no) {
  int value = 0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad integer '" + text + "'");
  }
  return value;
}

}  // namespace

std::vector<AnnotationRow> read_annotation_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open annotation file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty annotation file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line != kHeader) throw FormatError("unexpected CSV header in " + path.string());

  std::vector<AnnotationRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 7 fields");
    }
    AnnotationRow row;
    row.video_id = f[0];
    row.track_id = f[1];
    row.frame = parse_int(f[2], path, line_no);
    row.box = {parse_int(f[3], path, line_no), parse_int(f[4], path, line_no),
               parse_int(f[5], path, line_no), parse_int(f[6], path, line_no)};
    if (row.video_id.empty() || row.track_id.empty() || row.frame < 0 || !row.box.valid()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": invalid row");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_annotation_csv(const std::filesystem::path& path, const std::vector<AnnotationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.video_id << ',' << r.track_id << ',' << r.frame << ',' << r.box.left << ','
        << r.box.top << ',' << r.box.right << ',' << r.box.bottom << '\n';
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

std::map<std::string, std::vector<Track>> group_tracks(const std::vector<AnnotationRow>& rows) {
  std::map<std::string, std::map<std::string, std::map<int, BoundingBox>>> grouped;
  for (const auto& r : rows) {
    auto& frames = grouped[r.video_id][r.track_id];
    if (!frames.emplace(r.frame, r.box).second) {
      throw FormatError("track " + r.video_id + "/" + r.track_id + " repeats frame " +
                        std::to_string(r.frame));
    }
  }
  std::map<std::string, std::vector<Track>> out;
  for (const auto& [video, tracks] : grouped) {
    auto& list = out[video];
    for (const auto& [id, frames] : tracks) {
      Track t;
      t.track_id = id;
      t.first_frame = frames.begin()->first;
      for (const auto& [frame, box] : frames) {
        if (frame != t.first_frame + static_cast<int>(t.boxes.size())) {
          throw FormatError("track " + video + "/" + id + " has a gap before frame " +
                            std::to_string(frame));
        }
        t.boxes.push_back(box);
      }
      list.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<AnnotationRow> track_rows(const std::string& video_id, const std::vector<Track>& tracks) {
  std::vector<AnnotationRow> rows;
  for (const auto& t : tracks) {
    for (std::size_t i = 0; i < t.boxes.size(); ++i) {
      rows.push_back({video_id, t.track_id, t.first_frame + static_cast<int>(i), t.boxes[i]});
    }
  }
  return rows;
}

}  // namespace search_tracker
