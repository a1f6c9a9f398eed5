// Command-line surface for the seal-OCR pipeline: synthetic corpus
// generation, classifier training and evaluation, and per-stage or
// end-to-end execution with JSON reports.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "glyphline/classifiers.hpp"
#include "glyphline/io.hpp"
#include "glyphline/neuralnet.hpp"
#include "glyphline/pipeline.hpp"
#include "glyphline/schema.hpp"
#include "glyphline/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glyphline;

namespace {

// ---------------------------------------------------------------------------
// Logging (GLYPHLINE_LOG: unset/other -> quiet, "info" -> 1, "debug" -> 2)
// ---------------------------------------------------------------------------

int g_log_level = 0;

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (g_log_level >= 2) std::cerr << "[debug] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

StageConfig make_stage_config(const std::string& config_path, const std::string& scale,
                              const std::string& order) {
    StageConfig cfg;
    if (!config_path.empty()) {
        const json j = json::parse(read_file(config_path));
        if (j.contains("stage")) {
            const json& s = j.at("stage");
            if (s.contains("seal_blur_sigma")) cfg.seal_blur_sigma = s.at("seal_blur_sigma").get<double>();
            if (s.contains("seal_second_blur_kernel"))
                cfg.seal_second_blur_kernel = s.at("seal_second_blur_kernel").get<int>();
            if (s.contains("segmentation_blur_sigma"))
                cfg.segmentation_blur_sigma = s.at("segmentation_blur_sigma").get<double>();
            if (s.contains("segmentation_superbox_overlap"))
                cfg.segmentation_superbox_overlap = s.at("segmentation_superbox_overlap").get<double>();
            if (s.contains("max_proposal_area_frac"))
                cfg.max_proposal_area_frac = s.at("max_proposal_area_frac").get<double>();
            if (s.contains("scale_mode"))
                cfg.scale_mode = scale_mode_from_string(s.at("scale_mode").get<std::string>());
            if (s.contains("reading_order"))
                cfg.reading_order = reading_order_from_string(s.at("reading_order").get<std::string>());
            if (s.contains("grouping")) {
                const json& g = s.at("grouping");
                if (g.contains("concentric_frac")) cfg.grouping.concentric_frac = g.at("concentric_frac").get<double>();
                if (g.contains("superbox_overlap_frac"))
                    cfg.grouping.superbox_overlap_frac = g.at("superbox_overlap_frac").get<double>();
                if (g.contains("extension_offset_frac"))
                    cfg.grouping.extension_offset_frac = g.at("extension_offset_frac").get<double>();
            }
            if (s.contains("textbox")) {
                const json& t = s.at("textbox");
                if (t.contains("width_merge_frac")) cfg.textbox.width_merge_frac = t.at("width_merge_frac").get<double>();
                if (t.contains("height_merge_frac")) cfg.textbox.height_merge_frac = t.at("height_merge_frac").get<double>();
                if (t.contains("trim_major_frac")) cfg.textbox.trim_major_frac = t.at("trim_major_frac").get<double>();
                if (t.contains("trim_minor_frac")) cfg.textbox.trim_minor_frac = t.at("trim_minor_frac").get<double>();
            }
        }
    }
    if (!scale.empty()) cfg.scale_mode = scale_mode_from_string(scale);
    if (!order.empty()) cfg.reading_order = reading_order_from_string(order);
    cfg.validate();
    return cfg;
}

void apply_solver_config(const std::string& config_path, SolverConfig& solver) {
    if (config_path.empty()) return;
    const json j = json::parse(read_file(config_path));
    if (!j.contains("solver")) return;
    const json& s = j.at("solver");
    if (s.contains("base_lr")) solver.base_lr = s.at("base_lr").get<double>();
    if (s.contains("lr_policy")) solver.policy = lr_policy_from_string(s.at("lr_policy").get<std::string>());
    if (s.contains("gamma")) solver.gamma = s.at("gamma").get<double>();
    if (s.contains("power")) solver.power = s.at("power").get<double>();
    if (s.contains("step_size")) solver.step_size = s.at("step_size").get<int>();
    if (s.contains("momentum")) solver.momentum = s.at("momentum").get<double>();
    if (s.contains("weight_decay")) solver.weight_decay = s.at("weight_decay").get<double>();
    if (s.contains("batch_size")) solver.batch_size = s.at("batch_size").get<int>();
    if (s.contains("max_iter")) solver.max_iter = s.at("max_iter").get<int>();
    if (s.contains("val_interval")) solver.val_interval = s.at("val_interval").get<int>();
    if (s.contains("target_accuracy")) solver.target_accuracy = s.at("target_accuracy").get<double>();
}

std::string zero_pad(int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", width, value);
    return buf;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
    std::string out;
    std::string mode = "seals";
    int count = 10;
    std::uint64_t seed = 0;
    int glyphs = 5;
    bool vertical = false;
    bool no_icon = false;
    double noise = 0.0;
    int canvas = 512;
};

int synth_command(const SynthOpts& o) {
    fs::create_directories(o.out);
    const fs::path dir(o.out);
    Rng root(o.seed);

    if (o.mode == "seals") {
        json entries = json::array();
        for (int i = 0; i < o.count; ++i) {
            SyntheticSealSpec spec;
            spec.glyph_count = o.glyphs;
            spec.vertical = o.vertical;
            spec.icon_block = !o.no_icon;
            spec.noise_level = o.noise;
            spec.canvas_size = o.canvas;
            spec.seed = root.fork(static_cast<std::uint64_t>(i)).next_u64();
            const SyntheticSeal seal = generate_seal(spec);

            const std::string stem = "seal_" + zero_pad(i, 4);
            save_png((dir / (stem + ".png")).string(), seal.image);
            log_debug("wrote " + (dir / (stem + ".png")).string());

            json truth;
            truth["image"] = stem + ".png";
            truth["seed"] = spec.seed;
            truth["noise_level"] = spec.noise_level;
            truth["seal_box"] = box_to_json(seal.truth.seal_box);
            truth["text_box"] = box_to_json(seal.truth.text_box);
            truth["glyph_boxes"] = json::array();
            for (const auto& b : seal.truth.glyph_boxes) truth["glyph_boxes"].push_back(box_to_json(b));
            truth["glyph_labels"] = json::array();
            for (const auto l : seal.truth.glyph_labels) truth["glyph_labels"].push_back(to_string(l));
            truth["glyph_ids"] = seal.truth.glyph_ids;
            truth["has_icon"] = seal.truth.has_icon;
            if (seal.truth.has_icon) truth["icon_box"] = box_to_json(seal.truth.icon_box);
            write_file_atomic((dir / (stem + ".truth.json")).string(), truth.dump(2) + "\n");

            entries.push_back({{"image", stem + ".png"}, {"truth", stem + ".truth.json"}});
        }
        json manifest;
        manifest["count"] = o.count;
        manifest["seed"] = o.seed;
        manifest["entries"] = entries;
        write_file_atomic((dir / "manifest.json").string(), manifest.dump(2) + "\n");
        log_info("synth: wrote " + std::to_string(o.count) + " seals to " + o.out);
        std::cout << json{{"mode", o.mode}, {"count", o.count}, {"output_dir", o.out}}.dump() << "\n";
        return 0;
    }

    std::vector<LabeledCrop> crops;
    std::vector<std::string> names;
    if (o.mode == "glyph-crops") {
        const int jar = o.count / 2;
        crops = make_glyph_crops(jar, o.count - jar, o.seed);
        names = class_names(ClassifierRole::Glyph2);
    } else if (o.mode == "region-crops") {
        crops = make_region_crops((o.count + 2) / 3, o.seed);
        names = class_names(ClassifierRole::Region3);
    } else {
        std::cerr << "unknown synth mode: " << o.mode << " (expected seals|glyph-crops|region-crops)\n";
        return 2;
    }
    std::vector<ManifestEntry> entries;
    entries.reserve(crops.size());
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const std::string name = "crop_" + zero_pad(static_cast<int>(i), 5) + ".png";
        save_png((dir / name).string(), crops[i].image);
        entries.push_back({(dir / name).string(), names.at(static_cast<std::size_t>(crops[i].label))});
    }
    save_manifest_csv((dir / "manifest.csv").string(), entries);
    log_info("synth: wrote " + std::to_string(entries.size()) + " crops to " + o.out);
    std::cout << json{{"mode", o.mode},
                      {"count", entries.size()},
                      {"manifest", (dir / "manifest.csv").string()}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string role;
    std::string data;
    std::string out = "model.glc";
    std::string trace;
    std::string config;
    std::uint64_t seed = 0;
    double split_ratio = -1.0;
    int max_iter = -1;
    double target_accuracy = -1.0;
};

int train_command(const TrainOpts& o) {
    const ClassifierRole role = classifier_role_from_string(o.role);
    DatasetManifest manifest = load_manifest_csv(o.data);
    manifest.seed = o.seed;
    if (o.split_ratio > 0.0) manifest.split_ratio = o.split_ratio;

    for (const auto& name : class_names(role)) {
        const auto n = std::count_if(manifest.entries.begin(), manifest.entries.end(),
                                     [&](const ManifestEntry& e) { return e.label == name; });
        if (n < 2) {
            std::cerr << "class '" << name << "' has " << n << " examples in " << o.data
                      << " (need at least 2)\n";
            return 1;
        }
    }
    for (const auto& e : manifest.entries) label_index(role, e.label);  // validates labels

    const auto [train_entries, val_entries] = stratified_split(manifest);
    ClassifierHandle h =
        role == ClassifierRole::Region3 ? make_region_classifier() : make_glyph_classifier();
    const auto train_set = load_batchset(train_entries, role, h.preprocessing);
    const auto val_set = load_batchset(val_entries, role, h.preprocessing);

    SolverConfig solver =
        role == ClassifierRole::Region3 ? default_region_solver() : default_glyph_solver();
    apply_solver_config(o.config, solver);
    if (o.max_iter > 0) solver.max_iter = o.max_iter;
    if (o.target_accuracy >= 0.0) solver.target_accuracy = o.target_accuracy;

    log_info("train: " + std::to_string(train_set.count()) + " train / " +
             std::to_string(val_set.count()) + " val examples for role " + to_string(role));
    Rng rng(o.seed);
    h.net->init_params(rng);
    const TrainResult result = train(*h.net, train_set, val_set, solver, rng);
    log_info("train: stopped at iteration " + std::to_string(result.iterations_run) +
             ", best validation accuracy " + std::to_string(result.best_val_accuracy));

    save_classifier(h, o.out);
    if (!o.trace.empty()) write_trace_csv(o.trace, result.trace);

    std::cout << json{{"role", to_string(role)},
                      {"model", o.out},
                      {"train_examples", train_set.count()},
                      {"val_examples", val_set.count()},
                      {"iterations_run", result.iterations_run},
                      {"best_iteration", result.best_iteration},
                      {"best_val_accuracy", result.best_val_accuracy}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string model;
    std::string data;
    std::string out;
    bool e2e = false;
    std::string region_model;
    std::string glyph_model;
    std::string config;
    std::string scale;
    std::string order;
};

void emit_result(const json& j, const std::string& out_path) {
    const std::string text = j.dump(2) + "\n";
    if (!out_path.empty()) write_file_atomic(out_path, text);
    std::cout << text;
}

int eval_classifier_command(const EvalOpts& o) {
    if (o.model.empty()) {
        std::cerr << "eval: --model is required (or use --e2e)\n";
        return 2;
    }
    const ClassifierHandle h = load_classifier(o.model);
    const DatasetManifest manifest = load_manifest_csv(o.data);
    std::vector<RasterImage> crops;
    std::vector<int> labels;
    crops.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        labels.push_back(label_index(h.role, e.label));  // throws on role/label mismatch
        crops.push_back(load_image(e.path));
    }
    const EvalResult r = evaluate_classifier(h, crops, labels);
    log_info("eval: scored " + std::to_string(crops.size()) + " examples");
    emit_result(json{{"model", o.model},
                     {"count", crops.size()},
                     {"accuracy", r.accuracy},
                     {"classes", r.classes},
                     {"confusion", r.confusion}},
                o.out);
    return 0;
}

int eval_e2e_command(const EvalOpts& o) {
    if (o.region_model.empty() || o.glyph_model.empty()) {
        std::cerr << "eval --e2e: --region-model and --glyph-model are required\n";
        return 2;
    }
    const ClassifierHandle region_h = load_classifier(o.region_model);
    const ClassifierHandle glyph_h = load_classifier(o.glyph_model);
    const StageConfig cfg = make_stage_config(o.config, o.scale, o.order);

    const fs::path dir = fs::path(o.data).parent_path();
    const json manifest = json::parse(read_file(o.data));

    int text_full = 0, text_partial = 0, text_none = 0;
    int sym_full = 0, sym_partial = 0, sym_none = 0;
    std::int64_t label_correct = 0, label_total = 0;
    json rows = json::array();

    for (const auto& entry : manifest.at("entries")) {
        const std::string image_name = entry.at("image").get<std::string>();
        const RasterImage img = load_image((dir / image_name).string());
        const json truth = json::parse(read_file((dir / entry.at("truth").get<std::string>()).string()));
        const Box truth_text = box_from_json(truth.at("text_box"));

        const PipelineReport report = run_pipeline(img, region_h, glyph_h, cfg, image_name);
        log_debug("evaluated " + image_name);

        double best_iou = 0.0;
        for (const auto& tb : report.text_boxes) best_iou = std::max(best_iou, iou(tb, truth_text));
        if (best_iou >= 0.8) ++text_full;
        else if (best_iou >= 0.3) ++text_partial;
        else ++text_none;

        // greedy one-to-one matching of truth glyphs to predictions
        std::vector<bool> used(report.glyph_boxes.size(), false);
        int matched = 0;
        const auto& truth_boxes = truth.at("glyph_boxes");
        for (const auto& gj : truth_boxes) {
            const Box gt = box_from_json(gj);
            int best = -1;
            double best_giou = 0.0;
            for (std::size_t k = 0; k < report.glyph_boxes.size(); ++k) {
                if (used[k]) continue;
                const double v = iou(report.glyph_boxes[k], gt);
                if (v > best_giou) {
                    best_giou = v;
                    best = static_cast<int>(k);
                }
            }
            if (best >= 0 && best_giou >= 0.7) {
                used[static_cast<std::size_t>(best)] = true;
                ++matched;
                const std::string truth_label =
                    truth.at("glyph_labels")[static_cast<std::size_t>(&gj - &truth_boxes[0])]
                        .get<std::string>();
                const auto& pred = report.glyph_labels[static_cast<std::size_t>(best)];
                ++label_total;
                if (to_string(pred.first) == truth_label) ++label_correct;
            }
        }
        const int truth_count = static_cast<int>(truth_boxes.size());
        if (matched == truth_count && truth_count > 0) ++sym_full;
        else if (matched > 0) ++sym_partial;
        else ++sym_none;

        rows.push_back({{"input", image_name},
                        {"text_iou", best_iou},
                        {"text_boxes", report.text_boxes.size()},
                        {"glyphs_matched", matched},
                        {"glyphs_truth", truth_count}});
    }

    const int images = static_cast<int>(manifest.at("entries").size());
    json summary;
    summary["images"] = images;
    summary["text"] = {{"full", text_full}, {"partial", text_partial}, {"none", text_none}};
    summary["symbols"] = {{"full", sym_full}, {"partial", sym_partial}, {"none", sym_none}};
    summary["matched_glyph_label_accuracy"] =
        label_total == 0 ? 0.0 : static_cast<double>(label_correct) / static_cast<double>(label_total);
    summary["rows"] = rows;
    emit_result(summary, o.out);
    return 0;
}

// ---------------------------------------------------------------------------
// run / stage
// ---------------------------------------------------------------------------

struct RunOpts {
    std::vector<std::string> inputs;
    std::string region_model;
    std::string glyph_model;
    std::string out_dir = ".";
    std::string config;
    std::string scale;
    std::string order;
    std::string stage = "full";
    bool overlay = false;
    bool timings = false;
};

int run_command(const RunOpts& o) {
    const StageGate gate = stage_gate_from_string(o.stage);
    const StageConfig cfg = make_stage_config(o.config, o.scale, o.order);

    std::vector<fs::path> files;
    for (const auto& in : o.inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            for (const auto& e : fs::directory_iterator(p)) {
                const std::string ext = e.path().extension().string();
                if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
            }
        } else if (fs::exists(p)) {
            files.push_back(p);
        } else {
            std::cerr << "input not found: " << p.string() << "\n";
            return 1;
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "no input images\n";
        return 1;
    }

    ClassifierHandle region_h = make_region_classifier();
    ClassifierHandle glyph_h = make_glyph_classifier();
    const bool needs_region = static_cast<int>(gate) >= static_cast<int>(StageGate::Text);
    const bool needs_glyph = gate == StageGate::Full;
    if (needs_region) {
        if (o.region_model.empty() || !fs::exists(o.region_model)) {
            std::cerr << "missing region model: "
                      << (o.region_model.empty() ? "(not given)" : o.region_model) << "\n";
            return 1;
        }
        region_h = load_classifier(o.region_model);
    }
    if (needs_glyph) {
        if (o.glyph_model.empty() || !fs::exists(o.glyph_model)) {
            std::cerr << "missing glyph model: "
                      << (o.glyph_model.empty() ? "(not given)" : o.glyph_model) << "\n";
            return 1;
        }
        glyph_h = load_classifier(o.glyph_model);
    }

    fs::create_directories(o.out_dir);
    int failures = 0;
    json outputs = json::array();
    for (const auto& f : files) {
        try {
            const RasterImage img = load_image(f.string());
            const PipelineReport report =
                run_pipeline(img, region_h, glyph_h, cfg, f.filename().string(), gate);
            const fs::path report_path = fs::path(o.out_dir) / (f.stem().string() + ".report.json");
            write_file_atomic(report_path.string(), report_to_json(report, o.timings).dump(2) + "\n");
            log_info("processed " + f.string() + " -> " + report_path.string());
            log_debug("stage timings (ms): " + json(report.timings_ms).dump());
            if (o.overlay) {
                const fs::path overlay_path = fs::path(o.out_dir) / (f.stem().string() + ".overlay.png");
                save_png(overlay_path.string(), render_overlay(img, report));
            }
            outputs.push_back({{"input", f.string()}, {"report", report_path.string()}});
        } catch (const std::exception& e) {
            std::cerr << "skipped " << f.string() << ": " << e.what() << "\n";
            outputs.push_back({{"input", f.string()}, {"error", e.what()}});
            ++failures;
        }
    }
    std::cout << json{{"inputs", files.size()}, {"failed", failures}, {"outputs", outputs}}.dump(2)
              << "\n";
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* level = std::getenv("GLYPHLINE_LOG")) {
        const std::string s(level);
        if (s == "info") g_log_level = 1;
        if (s == "debug") g_log_level = 2;
    }

    CLI::App app{"glyphline: OCR pipeline for inscribed seals"};
    app.require_subcommand(1);

    SynthOpts synth_opts;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic seal corpus or crop dataset");
    synth->add_option("--out", synth_opts.out, "Output directory")->required();
    synth->add_option("--mode", synth_opts.mode, "seals | glyph-crops | region-crops");
    synth->add_option("--count", synth_opts.count, "Number of images / crops")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_opts.seed, "Base RNG seed");
    synth->add_option("--glyphs", synth_opts.glyphs, "Glyphs per seal (1-7)");
    synth->add_flag("--vertical", synth_opts.vertical, "Vertical glyph strip");
    synth->add_flag("--no-icon", synth_opts.no_icon, "Omit the iconography block");
    synth->add_option("--noise", synth_opts.noise, "Wear level in [0,1]");
    synth->add_option("--canvas", synth_opts.canvas, "Canvas side in pixels");

    TrainOpts train_opts;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier from a manifest CSV");
    train_cmd->add_option("--role", train_opts.role, "region3 | glyph2")->required();
    train_cmd->add_option("--data", train_opts.data, "Manifest CSV (path,label)")->required();
    train_cmd->add_option("--out", train_opts.out, "Checkpoint output path");
    train_cmd->add_option("--trace", train_opts.trace, "Training trace CSV path");
    train_cmd->add_option("--config", train_opts.config, "JSON config with a 'solver' section");
    train_cmd->add_option("--seed", train_opts.seed, "RNG seed");
    train_cmd->add_option("--split", train_opts.split_ratio, "Train share of the stratified split");
    train_cmd->add_option("--max-iter", train_opts.max_iter, "Override solver max iterations");
    train_cmd->add_option("--target-acc", train_opts.target_accuracy,
                          "Stop once validation accuracy reaches this value");

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a classifier or the end-to-end pipeline");
    eval_cmd->add_option("--model", eval_opts.model, "Classifier checkpoint (classifier mode)");
    eval_cmd->add_option("--data", eval_opts.data,
                         "Manifest CSV (classifier mode) or corpus manifest.json (--e2e)")
        ->required();
    eval_cmd->add_flag("--e2e", eval_opts.e2e, "End-to-end evaluation against ground truth");
    eval_cmd->add_option("--region-model", eval_opts.region_model, "Region classifier checkpoint");
    eval_cmd->add_option("--glyph-model", eval_opts.glyph_model, "Glyph classifier checkpoint");
    eval_cmd->add_option("--config", eval_opts.config, "JSON config with a 'stage' section");
    eval_cmd->add_option("--scale", eval_opts.scale, "512 | 256 | none");
    eval_cmd->add_option("--reading-order", eval_opts.order, "lr | rl | auto");
    eval_cmd->add_option("--out", eval_opts.out, "Also write the result JSON here");

    RunOpts run_opts;
    auto* run_cmd = app.add_subcommand("run", "Run the pipeline over images or directories");
    run_cmd->add_option("inputs", run_opts.inputs, "Image files or directories")->required();
    run_cmd->add_option("--region-model", run_opts.region_model, "Region classifier checkpoint");
    run_cmd->add_option("--glyph-model", run_opts.glyph_model, "Glyph classifier checkpoint");
    run_cmd->add_option("--out", run_opts.out_dir, "Report output directory");
    run_cmd->add_option("--config", run_opts.config, "JSON config with a 'stage' section");
    run_cmd->add_option("--scale", run_opts.scale, "512 | 256 | none");
    run_cmd->add_option("--reading-order", run_opts.order, "lr | rl | auto");
    run_cmd->add_option("--stage", run_opts.stage, "Stop after: seal|proposals|text|symbols|full");
    run_cmd->add_flag("--overlay", run_opts.overlay, "Write annotated overlay PNGs");
    run_cmd->add_flag("--timings", run_opts.timings, "Include per-stage timings in reports");

    RunOpts stage_opts;
    std::string stage_name;
    auto* stage_cmd = app.add_subcommand("stage", "Run the pipeline up to a named stage");
    stage_cmd->add_option("name", stage_name, "seal|proposals|text|symbols|full")->required();
    stage_cmd->add_option("inputs", stage_opts.inputs, "Image files or directories")->required();
    stage_cmd->add_option("--region-model", stage_opts.region_model, "Region classifier checkpoint");
    stage_cmd->add_option("--glyph-model", stage_opts.glyph_model, "Glyph classifier checkpoint");
    stage_cmd->add_option("--out", stage_opts.out_dir, "Report output directory");
    stage_cmd->add_option("--config", stage_opts.config, "JSON config with a 'stage' section");
    stage_cmd->add_option("--scale", stage_opts.scale, "512 | 256 | none");
    stage_cmd->add_option("--reading-order", stage_opts.order, "lr | rl | auto");
    stage_cmd->add_flag("--overlay", stage_opts.overlay, "Write annotated overlay PNGs");
    stage_cmd->add_flag("--timings", stage_opts.timings, "Include per-stage timings in reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
    }

    try {
        if (synth->parsed()) return synth_command(synth_opts);
        if (train_cmd->parsed()) return train_command(train_opts);
        if (eval_cmd->parsed())
            return eval_opts.e2e ? eval_e2e_command(eval_opts) : eval_classifier_command(eval_opts);
        if (run_cmd->parsed()) return run_command(run_opts);
        if (stage_cmd->parsed()) {
            stage_opts.stage = stage_name;
            return run_command(stage_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
