#include "dronenet/dataset.hpp"

#include "dronenet/errors.hpp"
#include "dronenet/groundtruth.hpp"
#include "dronenet/image_io.hpp"

namespace dronenet {

std::vector<Sample> load_dataset(const std::filesystem::path& annotations, const std::filesystem::path& images_dir) {
    const auto records = parse_annotations(annotations);
    std::vector<Sample> samples;
    samples.reserve(records.size());
    for (const auto& rec : records) {
        const auto path = images_dir / rec.file;
        Tensor<float> raw = load_image(path);
        validate_annotation(rec, raw.shape().h, raw.shape().w, annotations.string());
        samples.push_back({rec.file, normalize_image(raw), rec.points});
    }
    return samples;
}

DensityMap sample_ground_truth(const Sample& sample, double sigma, std::size_t factor) {
    const Shape& s = sample.image.shape();
    return downsample_gt(generate_density_map(sample.points, s.h, s.w, sigma), factor);
}

} // namespace dronenet
