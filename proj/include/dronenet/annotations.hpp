#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dronenet/groundtruth.hpp"

namespace dronenet {

/// Reads {"images": [{"file": "<relative path>", "points": [[x, y], ...]}, ...]}.
/// Throws DataError naming the file and the offending record.
std::vector<DotAnnotation> parse_annotations(const std::filesystem::path& path);
std::vector<DotAnnotation> parse_annotations_text(const std::string& text, const std::string& source = "<memory>");

std::string annotations_to_json(const std::vector<DotAnnotation>& annotations);
void write_annotations(const std::vector<DotAnnotation>& annotations, const std::filesystem::path& path);

/// Rejects points farther outside the image than nearest_pixel tolerates, with record context.
void validate_annotation(const DotAnnotation& ann, std::size_t height, std::size_t width, const std::string& source);

} // namespace dronenet
