#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dronenet/benchmark.hpp"
#include "dronenet/cli.hpp"
#include "dronenet/dataset.hpp"
#include "dronenet/errors.hpp"
#include "dronenet/eval_report.hpp"
#include "dronenet/gradcheck.hpp"
#include "dronenet/groundtruth.hpp"
#include "dronenet/image_io.hpp"
#include "dronenet/macs.hpp"
#include "dronenet/model_io.hpp"
#include "dronenet/trainer.hpp"

namespace dronenet::cli {
namespace fs = std::filesystem;

namespace {

using Defaults = std::map<std::string, std::string>;

struct Context {
    FlatConfig& cfg;
    RunManifest& manifest;
    fs::path out_dir;
    std::ostream& out;
    std::ostream& err;
};

using Handler = std::function<int(Context&)>;

struct Command {
    std::string name;
    std::string help;
    Defaults keys;
    Handler run;
};

const Defaults kCommon = {{"seed", "0"}, {"threads", "1"}, {"out", "."}};

// Keys that locate files rather than shape results; left out of checkpoint sidecars.
bool is_path_key(const std::string& key) {
    return key == "out" || key == "annotations" || key == "images" || key == "init_model";
}

std::string require(const FlatConfig& cfg, const std::string& key) {
    const std::string& v = cfg.str(key);
    if (v.empty()) {
        throw UsageError("missing required setting '" + key + "'");
    }
    return v;
}

unsigned threads_of(const FlatConfig& cfg) {
    const auto t = cfg.u64("threads");
    if (t == 0) {
        throw UsageError("config key 'threads': must be at least 1");
    }
    return static_cast<unsigned>(t);
}

std::string fmt(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string full(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

DroneNetConfig geometry_of(const FlatConfig& cfg) {
    const std::string& g = cfg.str("geometry");
    DroneNetConfig config;
    if (g == "standard") {
        config = DroneNetConfig::standard();
    } else if (g == "tiny") {
        config = DroneNetConfig::tiny();
    } else {
        throw UsageError("config key 'geometry': expected standard or tiny, got '" + g + "'");
    }
    const auto q = cfg.u64("q");
    if (q > 64) {
        throw UsageError("config key 'q': at most 64, got " + std::to_string(q));
    }
    return q == 0 ? config : config.with_uniform_q(static_cast<int>(q));
}

std::string artifact_name(const std::string& file) {
    fs::path p(file);
    p.replace_extension();
    std::string s = p.generic_string();
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

void check_channels(const DroneNet<float>& model, const Tensor<float>& image, const std::string& what) {
    if (image.shape().c != model.config().in_channels) {
        throw DataError(what + " has " + std::to_string(image.shape().c) + " channels, the model expects " +
                        std::to_string(model.config().in_channels));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
}

// ---- make-gt ----

int cmd_make_gt(Context& c) {
    const fs::path ann_path = require(c.cfg, "annotations");
    const fs::path images = require(c.cfg, "images");
    const double sigma = c.cfg.real("sigma");
    const auto factor = c.cfg.u64("factor");
    const bool csv = c.cfg.flag("csv");
    if (!(sigma > 0.0)) {
        throw UsageError("config key 'sigma': must be positive");
    }
    if (factor == 0) {
        throw UsageError("config key 'factor': must be at least 1");
    }
    c.manifest.inputs = {ann_path.string(), images.string()};
    const auto records = parse_annotations(ann_path);
    std::size_t failures = 0;
    for (const auto& rec : records) {
        try {
            const Tensor<float> img = load_image(images / rec.file);
            const Shape& s = img.shape();
            validate_annotation(rec, s.h, s.w, ann_path.string());
            DensityMap map = generate_density_map(rec, s.h, s.w, sigma);
            if (factor > 1) {
                map = downsample_gt(map, factor);
            }
            const fs::path dst = c.out_dir / (artifact_name(rec.file) + ".dmap");
            write_dmap(map, dst);
            c.manifest.add_output(dst);
            if (csv) {
                const fs::path csv_path = c.out_dir / (artifact_name(rec.file) + ".csv");
                write_dmap_csv(map, csv_path);
                c.manifest.add_output(csv_path);
            }
            c.out << rec.file << ' ' << rec.count() << ' ' << fmt(map.sum(), 6) << '\n';
        } catch (const DataError& e) {
            ++failures;
            c.err << "error: " << rec.file << ": " << e.what() << '\n';
        }
    }
    if (failures > 0) {
        throw DataError(std::to_string(failures) + " of " + std::to_string(records.size()) + " records failed");
    }
    return kExitOk;
}

// ---- train ----

TrainConfig train_config_of(const FlatConfig& cfg) {
    TrainConfig t;
    t.learning_rate = cfg.real("lr");
    t.epochs = cfg.u64("epochs");
    t.batch_size = cfg.u64("batch_size");
    t.seed = cfg.u64("seed");
    t.sigma = cfg.real("sigma");
    t.val_fraction = cfg.real("val_fraction");
    t.augment.flip = cfg.flag("flip");
    t.augment.brightness = cfg.flag("brightness");
    t.augment.contrast = cfg.flag("contrast");
    t.augment.brightness_delta = cfg.real("brightness_delta");
    t.augment.contrast_min = cfg.real("contrast_min");
    t.augment.contrast_max = cfg.real("contrast_max");
    t.checkpoint_every = cfg.u64("checkpoint_every");
    t.threads = threads_of(cfg);
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("train config: ") + e.what());
    }
    return t;
}

std::string sidecar_json(const FlatConfig& cfg, std::size_t epoch, double val_mae) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json train = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.values()) {
        if (!is_path_key(k)) {
            train[k] = v;
        }
    }
    doc["epoch"] = epoch;
    doc["val_mae"] = val_mae;
    doc["train_config"] = train;
    return doc.dump(2) + "\n";
}

template <typename T>
int train_with(DroneNet<T> model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
               const TrainConfig& tc, Context& c) {
    const fs::path log_path = c.out_dir / "train_log.csv";
    std::ofstream log(log_path, std::ios::binary);
    if (!log) {
        throw DataError("cannot write " + log_path.string());
    }
    log << "epoch,train_loss,val_mae,seconds\n";
    std::vector<fs::path> checkpoints;
    auto save_checkpoint = [&](const std::string& stem, const DroneNet<T>& m, const EpochLog& e) {
        const fs::path model_path = c.out_dir / (stem + ".sonn");
        const fs::path side_path = c.out_dir / (stem + ".json");
        save_model(m, model_path);
        write_text(side_path, sidecar_json(c.cfg, e.epoch, e.val_mae));
        for (const auto& p : {model_path, side_path}) {
            if (std::find(checkpoints.begin(), checkpoints.end(), p) == checkpoints.end()) {
                checkpoints.push_back(p);
            }
        }
    };
    auto on_epoch = [&](const EpochLog& e, const DroneNet<T>& m, bool is_best) {
        log << e.epoch << ',' << full(e.train_loss) << ',' << full(e.val_mae) << ',' << fmt(e.seconds, 6) << '\n';
        log.flush();
        c.out << "epoch " << e.epoch << " loss " << fmt(e.train_loss, 6) << " val_mae " << fmt(e.val_mae, 4)
              << (is_best ? " *" : "") << '\n';
        if (is_best) {
            save_checkpoint("best", m, e);
        }
        if (tc.checkpoint_every > 0 && e.epoch % tc.checkpoint_every == 0) {
            save_checkpoint("epoch_" + std::to_string(e.epoch), m, e);
        }
    };
    const TrainResult<T> result = train(model, train_set, val_set, tc, on_epoch);
    save_checkpoint("final", model, result.log.back());
    log.close();
    for (const auto& p : checkpoints) {
        c.manifest.add_output(p);
    }
    // Wall-clock seconds make the log itself non-reproducible.
    c.manifest.add_output(log_path, false);
    c.out << "best epoch " << result.best_epoch << " val_mae " << fmt(result.best_val_mae, 4) << '\n';
    return kExitOk;
}

int cmd_train(Context& c) {
    const TrainConfig tc = train_config_of(c.cfg);
    const fs::path ann_path = require(c.cfg, "annotations");
    const fs::path images = require(c.cfg, "images");
    c.manifest.inputs = {ann_path.string(), images.string()};
    const auto samples = load_dataset(ann_path, images);
    auto [train_set, val_set] = split_dataset(samples, tc.val_fraction, tc.seed);
    if (train_set.empty()) {
        throw DataError("training split is empty (" + std::to_string(samples.size()) + " images)");
    }
    c.out << "train " << train_set.size() << " images, validation " << val_set.size() << " images\n";

    DroneNet<float> model(DroneNetConfig::standard());
    const std::string init = c.cfg.str("init_model");
    if (!init.empty()) {
        model = load_model(init);
        c.manifest.inputs.push_back(init);
    } else {
        model = DroneNet<float>(geometry_of(c.cfg));
        init_weights(model, tc.seed);
    }
    const std::string& precision = c.cfg.str("precision");
    if (precision == "float") {
        return train_with(std::move(model), train_set, val_set, tc, c);
    }
    if (precision == "double") {
        return train_with(model.cast<double>(), train_set, val_set, tc, c);
    }
    throw UsageError("config key 'precision': expected float or double, got '" + precision + "'");
}

// ---- evaluate ----

int cmd_evaluate(Context& c) {
    const fs::path model_path = require(c.cfg, "model");
    const fs::path ann_path = require(c.cfg, "annotations");
    const fs::path images = require(c.cfg, "images");
    c.manifest.inputs = {model_path.string(), ann_path.string(), images.string()};
    EvalOptions opts;
    opts.sigma = c.cfg.real("sigma");
    opts.grids = c.cfg.list("grid");
    opts.bench_warmup = c.cfg.u64("warmup");
    opts.bench_runs = c.cfg.u64("runs");
    opts.threads = threads_of(c.cfg);
    if (!(opts.sigma > 0.0)) {
        throw UsageError("config key 'sigma': must be positive");
    }
    if (opts.bench_runs == 0) {
        throw UsageError("config key 'runs': must be at least 1");
    }

    const DroneNet<float> model = load_model(model_path);
    const auto samples = load_dataset(ann_path, images);
    if (samples.empty()) {
        throw DataError(ann_path.string() + " lists no images");
    }
    for (const auto& s : samples) {
        check_channels(model, s.image, "image " + s.id);
    }
    std::string dataset_id = c.cfg.str("dataset_id");
    if (dataset_id.empty()) {
        dataset_id = ann_path.stem().string();
    }
    const EvalReport report = evaluate(model, samples, opts, dataset_id, model_path.filename().string());

    std::ostringstream pred_csv;
    pred_csv << "file,true_count,estimated_count\n";
    ExecOptions exec;
    exec.threads = opts.threads;
    for (const auto& s : samples) {
        const DensityMap pred = to_density_map(model_forward(model, s.image, nullptr, exec));
        pred_csv << s.id << ',' << s.points.size() << ',' << full(pred.sum()) << '\n';
    }
    const fs::path pred_path = c.out_dir / "predictions.csv";
    write_text(pred_path, pred_csv.str());
    c.manifest.add_output(pred_path);

    const fs::path json_path = c.out_dir / "report.json";
    const std::string json = report_to_json(report);
    write_text(json_path, json);
    c.manifest.add_output(json_path, false);
    std::string ledger = c.cfg.str("ledger");
    const fs::path ledger_path = ledger.empty() ? c.out_dir / "results.csv" : fs::path(ledger);
    append_results_csv(report, ledger_path);
    c.manifest.add_output(ledger_path, false);
    c.out << json;
    return kExitOk;
}

// ---- predict ----

int cmd_predict(Context& c) {
    const fs::path model_path = require(c.cfg, "model");
    const fs::path image_path = require(c.cfg, "image");
    c.manifest.inputs = {model_path.string(), image_path.string()};
    const DroneNet<float> model = load_model(model_path);
    const Tensor<float> image = normalize_image(load_image(image_path));
    check_channels(model, image, image_path.string());
    ExecOptions exec;
    exec.threads = threads_of(c.cfg);
    const DensityMap pred = to_density_map(model_forward(model, image, nullptr, exec));

    const std::string stem = image_path.stem().string();
    const fs::path dmap_path = c.out_dir / (stem + ".dmap");
    write_dmap(pred, dmap_path);
    c.manifest.add_output(dmap_path);

    Tensor<float> heat(Shape{1, 1, pred.height, pred.width});
    const float peak = pred.max();
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        heat[i] = peak > 0.0f ? pred.values[i] / peak * 255.0f : 0.0f;
    }
    const fs::path heat_path = c.out_dir / (stem + "_heat.pgm");
    write_image(heat, heat_path);
    c.manifest.add_output(heat_path);

    c.out << fmt(pred.sum(), 2) << '\n';
    return kExitOk;
}

// ---- benchmark ----

int cmd_benchmark(Context& c) {
    const std::string model_file = c.cfg.str("model");
    DroneNet<float> model(DroneNetConfig::standard());
    if (!model_file.empty()) {
        model = load_model(model_file);
        c.manifest.inputs = {model_file};
    } else {
        model = DroneNet<float>(geometry_of(c.cfg));
        init_weights(model, c.cfg.u64("seed"));
    }
    const auto h = c.cfg.u64("height");
    const auto w = c.cfg.u64("width");
    if (h == 0 || w == 0) {
        throw UsageError("config keys 'height' and 'width' must be positive");
    }
    const auto runs = c.cfg.u64("runs");
    if (runs == 0) {
        throw UsageError("config key 'runs': must be at least 1");
    }
    const Shape shape{1, model.config().in_channels, h, w};
    const BenchmarkResult r = benchmark(model, shape, c.cfg.u64("warmup"), runs);
    const MacReport macs = count_macs(model, h, w);
    const Footprint fp = model_footprint(model);

    nlohmann::ordered_json doc;
    doc["height"] = h;
    doc["width"] = w;
    doc["warmup"] = r.warmup;
    doc["runs"] = r.runs;
    doc["mean_ms"] = r.mean_ms;
    doc["std_ms"] = r.std_ms;
    doc["min_ms"] = r.min_ms;
    doc["throughput_fps"] = r.fps;
    doc["gmacs"] = macs.gmacs();
    doc["power_multiplies"] = macs.total_power_multiplies;
    doc["parameters"] = model.parameter_count();
    doc["model_size_bytes"] = fp.size_bytes;
    const fs::path path = c.out_dir / "benchmark.json";
    write_text(path, doc.dump(2) + "\n");
    c.manifest.add_output(path, false);
    c.out << h << 'x' << w << ": " << fmt(r.mean_ms, 3) << " ms +- " << fmt(r.std_ms, 3) << " (min "
          << fmt(r.min_ms, 3) << "), " << fmt(r.fps, 2) << " fps, " << fmt(macs.gmacs(), 3) << " GMACs\n";
    return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(Context& c) {
    GradCheckOptions base;
    base.seed = c.cfg.u64("seed");
    base.tolerance = c.cfg.real("tolerance");
    base.step = c.cfg.real("step");
    base.floor = c.cfg.real("floor");
    base.height = c.cfg.u64("height");
    base.width = c.cfg.u64("width");
    base.max_checks_per_tensor = c.cfg.u64("max_checks");
    if (!(base.tolerance > 0.0) || !(base.step > 0.0) || !(base.floor > 0.0) || base.height == 0 || base.width == 0) {
        throw UsageError("gradcheck: tolerance, step, floor, height and width must be positive");
    }
    auto suite = gradcheck_suite();
    if (!c.cfg.str("q").empty()) {
        suite.clear();
        for (std::size_t q : c.cfg.list("q")) {
            suite.emplace_back("tiny-q" + std::to_string(q), DroneNetConfig::tiny().with_uniform_q(static_cast<int>(q)));
        }
    }
    bool all_passed = true;
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& [label, config] : suite) {
        GradCheckOptions opts = base;
        opts.config = config;
        GradCheckReport r = gradient_check(opts);
        r.label = label;
        nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
        for (const auto& e : r.entries) {
            c.out << label << ' ' << std::left << std::setw(20) << e.name << std::right << " checked "
                  << std::setw(4) << e.checked << " max_rel " << std::scientific << std::setprecision(3)
                  << e.max_rel_error << std::defaultfloat << '\n';
            tensors.push_back({{"name", e.name}, {"checked", e.checked}, {"max_rel_error", e.max_rel_error}});
        }
        c.out << label << (r.passed ? " PASS" : " FAIL") << " max_rel " << std::scientific << std::setprecision(3)
              << r.max_rel_error << " tolerance " << r.tolerance << std::defaultfloat << '\n';
        doc.push_back({{"config", label}, {"passed", r.passed}, {"max_rel_error", r.max_rel_error},
                       {"tolerance", r.tolerance}, {"tensors", tensors}});
        all_passed = all_passed && r.passed;
    }
    const fs::path path = c.out_dir / "gradcheck.json";
    write_text(path, doc.dump(2) + "\n");
    c.manifest.add_output(path);
    if (!all_passed) {
        c.manifest.status = "gradient check failed";
        return kExitGradcheck;
    }
    return kExitOk;
}

std::vector<Command> commands() {
    return {
        {"make-gt",
         "Write one density map per annotated image",
         {{"annotations", ""}, {"images", ""}, {"sigma", "7"}, {"factor", "1"}, {"csv", "false"}},
         cmd_make_gt},
        {"train",
         "Train a model; writes checkpoints, a sidecar per checkpoint and train_log.csv",
         {{"annotations", ""},
          {"images", ""},
          {"epochs", "1"},
          {"lr", "0.0001"},
          {"batch_size", "1"},
          {"sigma", "7"},
          {"val_fraction", "0.3"},
          {"flip", "true"},
          {"brightness", "true"},
          {"contrast", "true"},
          {"brightness_delta", "0.1"},
          {"contrast_min", "0.8"},
          {"contrast_max", "1.2"},
          {"checkpoint_every", "0"},
          {"precision", "float"},
          {"geometry", "standard"},
          {"q", "0"},
          {"init_model", ""}},
         cmd_train},
        {"evaluate",
         "Score a model on an annotated dataset",
         {{"model", ""},
          {"annotations", ""},
          {"images", ""},
          {"sigma", "7"},
          {"grid", "4"},
          {"warmup", "2"},
          {"runs", "10"},
          {"dataset_id", ""},
          {"ledger", ""}},
         cmd_evaluate},
        {"predict", "Print the estimated count and write the density map", {{"model", ""}, {"image", ""}}, cmd_predict},
        {"benchmark",
         "Time inference on a constant input",
         {{"model", ""},
          {"geometry", "standard"},
          {"q", "0"},
          {"height", "512"},
          {"width", "640"},
          {"warmup", "2"},
          {"runs", "10"}},
         cmd_benchmark},
        {"gradcheck",
         "Compare analytic gradients with central differences on tiny models",
         {{"tolerance", "1e-5"},
          {"step", "1e-5"},
          {"floor", "1e-5"}, {"height", "8"}, {"width", "8"}, {"max_checks", "0"}, {"q", ""}},
         cmd_gradcheck},
    };
}

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DroneNet crowd-density toolkit", "dronenet"};
    app.require_subcommand(1);
    const auto table = commands();
    std::map<std::string, std::map<std::string, std::string>> flag_values;
    std::map<std::string, std::string> config_paths;
    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : table) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        subs[cmd.name] = sub;
        sub->add_option("--config", config_paths[cmd.name], "Flat key=value settings file");
        Defaults keys = kCommon;
        keys.insert(cmd.keys.begin(), cmd.keys.end());
        auto& store = flag_values[cmd.name];
        for (const auto& [key, def] : keys) {
            const std::string hint = def.empty() ? "" : " (default " + def + ")";
            sub->add_option("--" + dashed(key), store[key], key + hint);
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const Command* cmd = nullptr;
    for (const auto& candidate : table) {
        if (subs[candidate.name]->parsed()) {
            cmd = &candidate;
        }
    }
    Defaults keys = kCommon;
    keys.insert(cmd->keys.begin(), cmd->keys.end());
    FlatConfig cfg(keys);

    RunManifest manifest;
    manifest.command = cmd->name;
    manifest.started_at = utc_now();
    fs::path out_dir;
    int code = kExitOk;
    try {
        if (!config_paths[cmd->name].empty()) {
            cfg.merge_file(config_paths[cmd->name]);
        }
        for (const auto& [key, value] : flag_values[cmd->name]) {
            if (subs[cmd->name]->count("--" + dashed(key)) > 0) {
                cfg.set(key, value);
            }
        }
        manifest.config = cfg.values();
        manifest.seed = cfg.u64("seed");
        (void)threads_of(cfg);
        out_dir = cfg.str("out").empty() ? fs::path(".") : fs::path(cfg.str("out"));
        fs::create_directories(out_dir);
        Context ctx{cfg, manifest, out_dir, out, err};
        code = cmd->run(ctx);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        manifest.status = std::string("usage error: ") + e.what();
        code = kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        manifest.status = std::string("numerical failure: ") + e.what();
        code = kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        manifest.status = std::string("error: ") + e.what();
        code = kExitData;
    }
    if (!out_dir.empty()) {
        manifest.finished_at = utc_now();
        try {
            manifest.write(out_dir / "manifest.json");
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            code = code == kExitOk ? kExitData : code;
        }
    }
    return code;
}

} // namespace dronenet::cli
