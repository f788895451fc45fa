#include "dronenet/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dronenet/benchmark.hpp"
#include "dronenet/errors.hpp"
#include "dronenet/metrics.hpp"

namespace dronenet {

using nlohmann::json;

namespace {

json number_or_inf(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

double read_number(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (s == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        throw DataError("report: expected a number, got \"" + s + "\"");
    }
    return j.get<double>();
}

std::string format_double(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

EvalReport evaluate(const DroneNet<float>& model, const std::vector<Sample>& samples, const EvalOptions& options,
                    const std::string& dataset_id, const std::string& model_id) {
    if (samples.empty()) {
        throw DataError("evaluate: dataset " + dataset_id + " has no images");
    }
    if (options.grids.empty()) {
        throw std::invalid_argument("evaluate: at least one GAME grid is required");
    }
    const std::size_t channels = model.config().in_channels;
    std::vector<CountPair> counts;
    std::vector<MapPair> maps;
    std::vector<double> ssims;
    std::vector<double> psnrs;
    ExecOptions exec;
    exec.threads = options.threads;
    for (const auto& s : samples) {
        if (s.image.shape().c != channels) {
            throw DataError("image " + s.id + " has " + std::to_string(s.image.shape().c) +
                            " channels, the model expects " + std::to_string(channels));
        }
        DensityMap pred = to_density_map(model_forward(model, s.image, nullptr, exec));
        DensityMap gt = sample_ground_truth(s, options.sigma);
        counts.push_back({pred.sum(), static_cast<double>(s.points.size())});
        ssims.push_back(ssim(pred, gt));
        psnrs.push_back(psnr(pred, gt));
        maps.push_back({std::move(pred), std::move(gt)});
    }

    EvalReport r;
    r.dataset_id = dataset_id;
    r.model_id = model_id;
    r.images = samples.size();
    r.mae = mae(counts);
    for (std::size_t g : options.grids) {
        r.game.push_back({g, game(maps, g)});
    }
    double ssim_total = 0.0;
    for (double v : ssims) {
        ssim_total += v;
    }
    r.ssim = ssim_total / static_cast<double>(ssims.size());
    r.psnr = finite_mean(psnrs);

    const Footprint fp = model_footprint(model);
    r.model_size_bytes = fp.size_bytes;
    r.gmacs = fp.gmacs;
    const BenchmarkResult b = benchmark(model, samples.front().image.shape(), options.bench_warmup, options.bench_runs);
    r.inference_ms = b.mean_ms;
    r.inference_std_ms = b.std_ms;
    r.throughput_fps = b.fps;
    return r;
}

std::string report_to_json(const EvalReport& r) {
    json game = json::object();
    for (const auto& g : r.game) {
        game[std::to_string(g.grid)] = number_or_inf(g.value);
    }
    json doc = {
        {"dataset", r.dataset_id},
        {"model", r.model_id},
        {"images", r.images},
        {"mae", number_or_inf(r.mae)},
        {"game", game},
        {"ssim", number_or_inf(r.ssim)},
        {"psnr", number_or_inf(r.psnr)},
        {"model_size_bytes", r.model_size_bytes},
        {"gmacs", number_or_inf(r.gmacs)},
        {"inference_ms", number_or_inf(r.inference_ms)},
        {"inference_std_ms", number_or_inf(r.inference_std_ms)},
        {"throughput_fps", number_or_inf(r.throughput_fps)},
    };
    return doc.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("report: malformed JSON: ") + e.what());
    }
    try {
        EvalReport r;
        r.dataset_id = doc.at("dataset").get<std::string>();
        r.model_id = doc.at("model").get<std::string>();
        r.images = doc.at("images").get<std::size_t>();
        r.mae = read_number(doc.at("mae"));
        for (const auto& [key, value] : doc.at("game").items()) {
            r.game.push_back({static_cast<std::size_t>(std::stoull(key)), read_number(value)});
        }
        std::sort(r.game.begin(), r.game.end(), [](const GameValue& a, const GameValue& b) { return a.grid < b.grid; });
        r.ssim = read_number(doc.at("ssim"));
        r.psnr = read_number(doc.at("psnr"));
        r.model_size_bytes = doc.at("model_size_bytes").get<std::size_t>();
        r.gmacs = read_number(doc.at("gmacs"));
        r.inference_ms = read_number(doc.at("inference_ms"));
        r.inference_std_ms = read_number(doc.at("inference_std_ms"));
        r.throughput_fps = read_number(doc.at("throughput_fps"));
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("report: ") + e.what());
    }
}

std::string report_csv_header(const EvalReport& r) {
    std::string h = "dataset,model,images,mae";
    for (const auto& g : r.game) {
        h += ",game" + std::to_string(g.grid);
    }
    return h + ",ssim,psnr,model_size_bytes,gmacs,inference_ms,inference_std_ms,throughput_fps";
}

std::string report_csv_row(const EvalReport& r) {
    std::string row = r.dataset_id + "," + r.model_id + "," + std::to_string(r.images) + "," + format_double(r.mae);
    for (const auto& g : r.game) {
        row += "," + format_double(g.value);
    }
    row += "," + format_double(r.ssim) + "," + format_double(r.psnr) + "," + std::to_string(r.model_size_bytes) + "," +
           format_double(r.gmacs) + "," + format_double(r.inference_ms) + "," + format_double(r.inference_std_ms) + "," +
           format_double(r.throughput_fps);
    return row;
}

void append_results_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::error_code ec;
    const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw DataError("cannot open results ledger " + path.string());
    }
    if (fresh) {
        out << report_csv_header(report) << '\n';
    }
    out << report_csv_row(report) << '\n';
}

} // namespace dronenet
