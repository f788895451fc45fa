#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dronenet/dataset.hpp"
#include "dronenet/model.hpp"

namespace dronenet {

struct GameValue {
    std::size_t grid = 4;
    double value = 0.0;
};

struct EvalReport {
    std::string dataset_id;
    std::string model_id;
    std::size_t images = 0;
    double mae = 0.0;
    std::vector<GameValue> game;
    double ssim = 0.0;
    double psnr = 0.0; ///< +inf when every prediction matched exactly
    std::size_t model_size_bytes = 0;
    double gmacs = 0.0;
    double inference_ms = 0.0;
    double inference_std_ms = 0.0;
    double throughput_fps = 0.0;
};

struct EvalOptions {
    double sigma = 7.0;
    std::vector<std::size_t> grids{4};
    std::size_t bench_warmup = 2;
    std::size_t bench_runs = 10;
    unsigned threads = 1;
};

/// Scores every sample (counts, GAME, SSIM, PSNR on output-scale maps), then adds the model
/// footprint and a benchmark on the first sample's image shape.
EvalReport evaluate(const DroneNet<float>& model, const std::vector<Sample>& samples, const EvalOptions& options,
                    const std::string& dataset_id, const std::string& model_id);

/// JSON document; an infinite PSNR is written as the string "inf".
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

std::string report_csv_header(const EvalReport& report);
std::string report_csv_row(const EvalReport& report);
/// Appends one row, writing the header first when the file is new or empty.
void append_results_csv(const EvalReport& report, const std::filesystem::path& path);

} // namespace dronenet
