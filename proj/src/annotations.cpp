#include "dronenet/annotations.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dronenet/errors.hpp"

namespace dronenet {

using nlohmann::json;

std::vector<DotAnnotation> parse_annotations_text(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(source + ": malformed JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array()) {
        throw DataError(source + ": expected an object with an \"images\" array");
    }
    std::vector<DotAnnotation> out;
    const auto& images = doc["images"];
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& rec = images[i];
        const std::string where = source + ": images[" + std::to_string(i) + "]";
        if (!rec.is_object() || !rec.contains("file") || !rec["file"].is_string()) {
            throw DataError(where + ": missing string field \"file\"");
        }
        DotAnnotation ann;
        ann.file = rec["file"].get<std::string>();
        if (rec.contains("points")) {
            const auto& pts = rec["points"];
            if (!pts.is_array()) {
                throw DataError(where + " (" + ann.file + "): \"points\" must be an array");
            }
            for (std::size_t k = 0; k < pts.size(); ++k) {
                const auto& p = pts[k];
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                    throw DataError(where + " (" + ann.file + "): points[" + std::to_string(k) +
                                    "] must be a numeric [x, y] pair");
                }
                ann.points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
        }
        out.push_back(std::move(ann));
    }
    return out;
}

std::vector<DotAnnotation> parse_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open annotation file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_annotations_text(buf.str(), path.string());
}

std::string annotations_to_json(const std::vector<DotAnnotation>& annotations) {
    json images = json::array();
    for (const auto& ann : annotations) {
        json pts = json::array();
        for (const auto& p : ann.points) {
            pts.push_back({p.x, p.y});
        }
        images.push_back({{"file", ann.file}, {"points", std::move(pts)}});
    }
    return json{{"images", std::move(images)}}.dump(1);
}

void write_annotations(const std::vector<DotAnnotation>& annotations, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out << annotations_to_json(annotations) << '\n';
}

void validate_annotation(const DotAnnotation& ann, std::size_t height, std::size_t width, const std::string& source) {
    for (std::size_t k = 0; k < ann.points.size(); ++k) {
        try {
            (void)nearest_pixel(ann.points[k], height, width);
        } catch (const DataError& e) {
            throw DataError(source + " (" + ann.file + "): points[" + std::to_string(k) + "]: " + e.what());
        }
    }
}

} // namespace dronenet
