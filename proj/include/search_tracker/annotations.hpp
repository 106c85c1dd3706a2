#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "search_tracker/geometry.hpp"

namespace search_tracker {

/// One line of the annotation / track CSV:
/// `video_id,track_id,frame,left,top,right,bottom`, frame 0-based.
struct AnnotationRow {
  std::string video_id;
  std::string track_id;
  int frame = 0;
  BoundingBox box;
};

std::vector<AnnotationRow> read_annotation_csv(const std::filesystem::path& path);
void write_annotation_csv(const std::filesystem::path& path, const std::vector<AnnotationRow>& rows);

/// Groups rows into tracks per video. Tracks are sorted by id; a track with a
/// gap in its frame range or a repeated frame is rejected with FormatError.
std::map<std::string, std::vector<Track>> group_tracks(const std::vector<AnnotationRow>& rows);

std::vector<AnnotationRow> track_rows(const std::string& video_id, const std::vector<Track>& tracks);

}  // namespace search_tracker
