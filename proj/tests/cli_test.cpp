// Drives the command-line binary as a subprocess and checks its user-facing
// contract: corpus synthesis, classifier training and evaluation, pipeline
// runs with stage gates, report schema conformance, byte-level determinism,
// and the exit-code convention (0 success, 1 runtime failure, 2 usage error).

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "glyphline/classifiers.hpp"
#include "glyphline/io.hpp"
#include "glyphline/schema.hpp"

namespace gl = glyphline;
namespace fs = std::filesystem;
using nlohmann::json;
using testing::HasSubstr;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (const char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    q += "'";
    return q;
}

CmdResult run_cli(const std::vector<std::string>& args, const std::string& env_prefix = "") {
    static int counter = 0;
    ++counter;
    const fs::path out_path = fs::path(testing::TempDir()) / ("cli_stdout_" + std::to_string(counter));
    const fs::path err_path = fs::path(testing::TempDir()) / ("cli_stderr_" + std::to_string(counter));

    std::string cmd = env_prefix.empty() ? "" : env_prefix + " ";
    cmd += shell_quote(GLYPHLINE_BIN);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " > " + shell_quote(out_path.string()) + " 2> " + shell_quote(err_path.string());

    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = gl::read_file(out_path.string());
    r.err = gl::read_file(err_path.string());
    return r;
}

// Fresh directory under the test temp root, wiped if a previous run left it.
fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::path(testing::TempDir()) / ("glyphline_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json load_schema(const std::string& name) {
    return json::parse(gl::read_file((fs::path(SCHEMA_DIR) / name).string()));
}

void expect_schema_valid(const json& doc, const json& schema, const std::string& what) {
    const auto errors = gl::validate_schema(doc, schema);
    EXPECT_TRUE(errors.empty()) << what << ": " << (errors.empty() ? "valid" : errors.front());
}

// Glyph-role handle whose net prefers class 0 for bright inputs and class 1
// for dark ones; cheap to evaluate and fully deterministic once saved.
gl::ClassifierHandle brightness_handle() {
    gl::ClassifierHandle h;
    h.role = gl::ClassifierRole::Glyph2;
    h.preprocessing = {32, true, 255.0};
    h.net = std::make_shared<gl::Network<float>>(
        gl::Network<float>({1, 32, 32}, {gl::LayerSpec::fully_connected(2)}));
    auto pb = h.net->param_buffers();
    std::fill(pb[0]->begin(), pb[0]->begin() + 1024, 1.0f / 1024.0f);
    std::fill(pb[0]->begin() + 1024, pb[0]->end(), 0.0f);
    *pb[1] = {0.0f, 0.5f};
    return h;
}

// Small seal corpus plus seed-initialized (untrained) classifier checkpoints,
// built once and reused by the pipeline-facing tests.
struct Artifacts {
    fs::path corpus;
    std::string first_seal;
    std::string region_model;
    std::string glyph_model;
};

const Artifacts& shared_artifacts() {
    static const Artifacts art = [] {
        Artifacts a;
        a.corpus = scratch_dir("shared_corpus");
        const CmdResult r = run_cli({"synth", "--out", a.corpus.string(), "--count", "2", "--seed",
                                     "21", "--glyphs", "3", "--canvas", "384"});
        if (r.exit_code != 0) throw std::runtime_error("corpus synthesis failed: " + r.err);
        a.first_seal = (a.corpus / "seal_0000.png").string();

        gl::ClassifierHandle region = gl::make_region_classifier();
        gl::Rng region_rng(7);
        region.net->init_params(region_rng);
        a.region_model = (fs::path(testing::TempDir()) / "cli_region_model.glc").string();
        gl::save_classifier(region, a.region_model);

        gl::ClassifierHandle glyph = gl::make_glyph_classifier();
        gl::Rng glyph_rng(8);
        glyph.net->init_params(glyph_rng);
        a.glyph_model = (fs::path(testing::TempDir()) / "cli_glyph_model.glc").string();
        gl::save_classifier(glyph, a.glyph_model);
        return a;
    }();
    return art;
}

TEST(Usage, HelpExitsZeroAndListsSubcommands) {
    const CmdResult r = run_cli({"--help"});
    EXPECT_EQ(r.exit_code, 0);
    for (const char* name : {"synth", "train", "eval", "run", "stage"})
        EXPECT_THAT(r.out, HasSubstr(name));
}

TEST(Usage, MalformedInvocationsExitTwo) {
    EXPECT_EQ(run_cli({}).exit_code, 2);                                         // no subcommand
    EXPECT_EQ(run_cli({"synth"}).exit_code, 2);                                  // missing --out
    EXPECT_EQ(run_cli({"synth", "--out", "x", "--bogus"}).exit_code, 2);         // unknown flag
    EXPECT_EQ(run_cli({"synth", "--out", "x", "--count", "0"}).exit_code, 2);    // non-positive count
    EXPECT_EQ(run_cli({"frobnicate"}).exit_code, 2);                             // unknown subcommand
}

TEST(Usage, UnknownSynthModeExitsTwo) {
    const fs::path dir = scratch_dir("synth_badmode");
    const CmdResult r = run_cli({"synth", "--out", dir.string(), "--mode", "banana"});
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_THAT(r.err, HasSubstr("unknown synth mode"));
}

TEST(Usage, LogLevelEnvVarControlsStderrChatter) {
    const fs::path dir = scratch_dir("log_levels");
    const std::vector<std::string> args = {"synth", "--out", dir.string(), "--mode",
                                           "glyph-crops", "--count", "2"};
    const CmdResult quiet = run_cli(args);
    ASSERT_EQ(quiet.exit_code, 0);
    EXPECT_EQ(quiet.err, "");

    const CmdResult info = run_cli(args, "GLYPHLINE_LOG=info");
    ASSERT_EQ(info.exit_code, 0);
    EXPECT_THAT(info.err, HasSubstr("[info]"));
    EXPECT_THAT(info.err, testing::Not(HasSubstr("[debug]")));

    const CmdResult debug = run_cli({"synth", "--out", dir.string(), "--count", "1", "--canvas",
                                     "384", "--glyphs", "3"},
                                    "GLYPHLINE_LOG=debug");
    ASSERT_EQ(debug.exit_code, 0);
    EXPECT_THAT(debug.err, HasSubstr("[info]"));
    EXPECT_THAT(debug.err, HasSubstr("[debug]"));
}

TEST(SynthSeals, WritesASchemaValidCorpusWithManifest) {
    const fs::path dir = scratch_dir("synth_seals");
    const CmdResult r = run_cli({"synth", "--out", dir.string(), "--count", "3", "--seed", "7",
                                 "--glyphs", "4", "--canvas", "384"});
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json status = json::parse(r.out);
    EXPECT_EQ(status.at("mode"), "seals");
    EXPECT_EQ(status.at("count"), 3);
    EXPECT_EQ(status.at("output_dir"), dir.string());

    const json manifest = json::parse(gl::read_file((dir / "manifest.json").string()));
    EXPECT_EQ(manifest.at("count"), 3);
    EXPECT_EQ(manifest.at("seed"), 7);
    ASSERT_EQ(manifest.at("entries").size(), 3u);

    const json schema = load_schema("ground_truth.schema.json");
    for (const auto& entry : manifest.at("entries")) {
        const std::string image_name = entry.at("image").get<std::string>();
        const gl::RasterImage img = gl::load_image((dir / image_name).string());
        EXPECT_EQ(img.width, 384);
        EXPECT_EQ(img.height, 384);

        const json truth =
            json::parse(gl::read_file((dir / entry.at("truth").get<std::string>()).string()));
        expect_schema_valid(truth, schema, image_name);
        EXPECT_EQ(truth.at("image"), image_name);
        EXPECT_EQ(truth.at("glyph_boxes").size(), 4u);
        EXPECT_EQ(truth.at("glyph_labels").size(), 4u);
        EXPECT_EQ(truth.at("glyph_ids").size(), 4u);
    }
}

TEST(SynthSeals, IsByteIdenticalForAFixedSeed) {
    const fs::path a = scratch_dir("synth_det_a");
    const fs::path b = scratch_dir("synth_det_b");
    const std::vector<std::string> tail = {"--count", "2", "--seed", "9", "--glyphs", "3",
                                           "--canvas", "384", "--noise", "0.3"};
    std::vector<std::string> run_a = {"synth", "--out", a.string()};
    std::vector<std::string> run_b = {"synth", "--out", b.string()};
    run_a.insert(run_a.end(), tail.begin(), tail.end());
    run_b.insert(run_b.end(), tail.begin(), tail.end());
    ASSERT_EQ(run_cli(run_a).exit_code, 0);
    ASSERT_EQ(run_cli(run_b).exit_code, 0);

    for (const char* name : {"seal_0000.png", "seal_0001.png", "seal_0000.truth.json",
                             "seal_0001.truth.json", "manifest.json"})
        EXPECT_EQ(gl::read_file((a / name).string()), gl::read_file((b / name).string())) << name;
}

TEST(SynthCrops, GlyphAndRegionModesEmitBalancedManifests) {
    const fs::path gdir = scratch_dir("synth_glyph_crops");
    const CmdResult g = run_cli({"synth", "--out", gdir.string(), "--mode", "glyph-crops",
                                 "--count", "10", "--seed", "3"});
    ASSERT_EQ(g.exit_code, 0) << g.err;
    const json gstatus = json::parse(g.out);
    EXPECT_EQ(gstatus.at("mode"), "glyph-crops");
    EXPECT_EQ(gstatus.at("count"), 10);

    const gl::DatasetManifest gm =
        gl::load_manifest_csv(gstatus.at("manifest").get<std::string>());
    ASSERT_EQ(gm.entries.size(), 10u);
    std::map<std::string, int> glyph_counts;
    for (const auto& e : gm.entries) {
        ++glyph_counts[e.label];
        const gl::RasterImage img = gl::load_image(e.path);
        EXPECT_GT(img.width, 0);
    }
    EXPECT_EQ(glyph_counts["Jar"], 5);
    EXPECT_EQ(glyph_counts["NoJar"], 5);

    const fs::path rdir = scratch_dir("synth_region_crops");
    const CmdResult rr = run_cli({"synth", "--out", rdir.string(), "--mode", "region-crops",
                                  "--count", "9", "--seed", "4"});
    ASSERT_EQ(rr.exit_code, 0) << rr.err;
    const gl::DatasetManifest rm =
        gl::load_manifest_csv(json::parse(rr.out).at("manifest").get<std::string>());
    ASSERT_EQ(rm.entries.size(), 9u);
    std::map<std::string, int> region_counts;
    for (const auto& e : rm.entries) ++region_counts[e.label];
    EXPECT_EQ(region_counts["Text"], 3);
    EXPECT_EQ(region_counts["NoText"], 3);
    EXPECT_EQ(region_counts["Both"], 3);
}

TEST(Train, TrainsFromAManifestAndWritesModelPlusTrace) {
    const fs::path data = scratch_dir("train_data");
    const CmdResult s = run_cli({"synth", "--out", data.string(), "--mode", "glyph-crops",
                                 "--count", "60", "--seed", "3"});
    ASSERT_EQ(s.exit_code, 0) << s.err;
    const std::string manifest = json::parse(s.out).at("manifest").get<std::string>();

    const fs::path model = data / "model.glc";
    const fs::path trace = data / "trace.csv";
    const CmdResult t =
        run_cli({"train", "--role", "glyph2", "--data", manifest, "--out", model.string(),
                 "--trace", trace.string(), "--seed", "1", "--max-iter", "40"});
    ASSERT_EQ(t.exit_code, 0) << t.err;

    const json status = json::parse(t.out);
    EXPECT_EQ(status.at("role"), "glyph2");
    EXPECT_EQ(status.at("model"), model.string());
    EXPECT_EQ(status.at("train_examples"), 42);  // 70:30 stratified split of 30+30
    EXPECT_EQ(status.at("val_examples"), 18);
    EXPECT_EQ(status.at("iterations_run"), 40);
    EXPECT_GE(status.at("best_iteration").get<int>(), 0);
    EXPECT_LT(status.at("best_iteration").get<int>(), 40);
    const double acc = status.at("best_val_accuracy").get<double>();
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);

    const gl::ClassifierHandle loaded = gl::load_classifier(model.string());
    EXPECT_EQ(loaded.role, gl::ClassifierRole::Glyph2);
    EXPECT_EQ(loaded.net->num_classes(), 2);

    const std::string trace_text = gl::read_file(trace.string());
    EXPECT_THAT(trace_text, testing::StartsWith("iteration,loss,lr,val_accuracy\n"));
    EXPECT_THAT(trace_text, HasSubstr("\n0,"));
}

TEST(Train, RejectsUnderpopulatedClassesAndUnknownRoles) {
    const fs::path dir = scratch_dir("train_reject");
    const fs::path manifest = dir / "manifest.csv";
    gl::write_file_atomic(manifest.string(), "a.png,Jar\nb.png,Jar\nc.png,NoJar\n");

    const CmdResult r = run_cli({"train", "--role", "glyph2", "--data", manifest.string()});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_THAT(r.err, HasSubstr("need at least 2"));

    const CmdResult bad_role = run_cli({"train", "--role", "banana", "--data", manifest.string()});
    EXPECT_EQ(bad_role.exit_code, 1);
    EXPECT_THAT(bad_role.err, HasSubstr("error:"));
}

TEST(Eval, ScoresACheckpointAgainstAnInProcessOracle) {
    const fs::path dir = scratch_dir("eval_classifier");
    const CmdResult s = run_cli({"synth", "--out", dir.string(), "--mode", "glyph-crops",
                                 "--count", "10", "--seed", "5"});
    ASSERT_EQ(s.exit_code, 0) << s.err;
    const std::string manifest_path = json::parse(s.out).at("manifest").get<std::string>();

    const std::string model = (dir / "bright.glc").string();
    gl::save_classifier(brightness_handle(), model);

    const fs::path out_copy = dir / "result.json";
    const CmdResult e = run_cli({"eval", "--model", model, "--data", manifest_path, "--out",
                                 out_copy.string()});
    ASSERT_EQ(e.exit_code, 0) << e.err;

    const json result = json::parse(e.out);
    EXPECT_EQ(result.at("model"), model);
    EXPECT_EQ(result.at("count"), 10);
    EXPECT_EQ(result.at("classes"), json(std::vector<std::string>{"Jar", "NoJar"}));
    ASSERT_EQ(result.at("confusion").size(), 2u);
    ASSERT_EQ(result.at("confusion")[0].size(), 2u);

    // Replicate the evaluation in-process with the identical handle.
    const gl::ClassifierHandle h = gl::load_classifier(model);
    const gl::DatasetManifest m = gl::load_manifest_csv(manifest_path);
    std::vector<std::vector<int>> confusion(2, std::vector<int>(2, 0));
    int correct = 0;
    for (const auto& entry : m.entries) {
        const int truth = gl::label_index(h.role, entry.label);
        const auto [pred, conf] = gl::classify(h, gl::load_image(entry.path));
        ++confusion[truth][pred];
        if (pred == truth) ++correct;
    }
    EXPECT_EQ(result.at("confusion"), json(confusion));
    EXPECT_DOUBLE_EQ(result.at("accuracy").get<double>(), correct / 10.0);

    // --out writes the same bytes that went to stdout.
    EXPECT_EQ(gl::read_file(out_copy.string()), e.out);
}

TEST(Eval, MissingModelFlagsAreUsageErrors) {
    const CmdResult plain = run_cli({"eval", "--data", "whatever.csv"});
    EXPECT_EQ(plain.exit_code, 2);
    EXPECT_THAT(plain.err, HasSubstr("--model is required"));

    const CmdResult e2e = run_cli({"eval", "--e2e", "--data", "whatever.json"});
    EXPECT_EQ(e2e.exit_code, 2);
    EXPECT_THAT(e2e.err, HasSubstr("--region-model and --glyph-model"));
}

TEST(Run, ProposalsGateNeedsNoModelsAndWritesSchemaValidReports) {
    const Artifacts& art = shared_artifacts();
    const fs::path out = scratch_dir("run_proposals");
    const CmdResult r =
        run_cli({"run", art.corpus.string(), "--stage", "proposals", "--out", out.string()});
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json status = json::parse(r.out);
    EXPECT_EQ(status.at("inputs"), 2);
    EXPECT_EQ(status.at("failed"), 0);
    ASSERT_EQ(status.at("outputs").size(), 2u);

    const json schema = load_schema("report.schema.json");
    for (const auto& entry : status.at("outputs")) {
        const json report = json::parse(gl::read_file(entry.at("report").get<std::string>()));
        expect_schema_valid(report, schema, entry.at("report").get<std::string>());
        EXPECT_FALSE(report.at("proposals").empty());
        EXPECT_TRUE(report.at("text_boxes").empty());  // gate stops before classification
        EXPECT_FALSE(report.contains("timings_ms"));
        EXPECT_EQ(report.at("errors").size(), 0u);
    }
}

TEST(Run, FullGateReportsAreByteIdenticalAcrossRepeatedRuns) {
    const Artifacts& art = shared_artifacts();
    const fs::path out_a = scratch_dir("run_full_a");
    const fs::path out_b = scratch_dir("run_full_b");
    const std::vector<std::string> tail = {"--region-model", art.region_model, "--glyph-model",
                                           art.glyph_model};
    std::vector<std::string> run_a = {"run", art.first_seal, "--out", out_a.string()};
    std::vector<std::string> run_b = {"run", art.first_seal, "--out", out_b.string()};
    run_a.insert(run_a.end(), tail.begin(), tail.end());
    run_b.insert(run_b.end(), tail.begin(), tail.end());

    const CmdResult a = run_cli(run_a);
    const CmdResult b = run_cli(run_b);
    ASSERT_EQ(a.exit_code, 0) << a.err;
    ASSERT_EQ(b.exit_code, 0) << b.err;

    const std::string report_a = gl::read_file((out_a / "seal_0000.report.json").string());
    const std::string report_b = gl::read_file((out_b / "seal_0000.report.json").string());
    EXPECT_EQ(report_a, report_b);

    const json report = json::parse(report_a);
    expect_schema_valid(report, load_schema("report.schema.json"), "full-gate report");
    EXPECT_EQ(report.at("glyph_labels").size(), report.at("glyph_boxes").size());
}

TEST(Run, TimingAndOverlayFlagsEmitExtras) {
    const Artifacts& art = shared_artifacts();
    const fs::path out = scratch_dir("run_extras");
    const CmdResult r = run_cli({"run", art.first_seal, "--stage", "seal", "--out", out.string(),
                                 "--timings", "--overlay"});
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json report = json::parse(gl::read_file((out / "seal_0000.report.json").string()));
    ASSERT_TRUE(report.contains("timings_ms"));
    EXPECT_TRUE(report.at("timings_ms").contains("extract_seal"));

    const gl::RasterImage overlay = gl::load_image((out / "seal_0000.overlay.png").string());
    EXPECT_EQ(overlay.channels, 3);
    EXPECT_EQ(overlay.width, 384);
    EXPECT_EQ(overlay.height, 384);
}

TEST(Run, MissingInputsAndModelsExitOne) {
    const Artifacts& art = shared_artifacts();

    const CmdResult missing_input = run_cli({"run", "/nonexistent/seal.png", "--stage", "proposals"});
    EXPECT_EQ(missing_input.exit_code, 1);
    EXPECT_THAT(missing_input.err, HasSubstr("input not found"));

    const CmdResult no_region = run_cli({"run", art.first_seal, "--stage", "text"});
    EXPECT_EQ(no_region.exit_code, 1);
    EXPECT_THAT(no_region.err, HasSubstr("missing region model"));

    const CmdResult no_glyph =
        run_cli({"run", art.first_seal, "--region-model", art.region_model});
    EXPECT_EQ(no_glyph.exit_code, 1);
    EXPECT_THAT(no_glyph.err, HasSubstr("missing glyph model"));
}

TEST(Run, SkipsUnreadableImagesButProcessesTheRest) {
    const Artifacts& art = shared_artifacts();
    const fs::path dir = scratch_dir("run_mixed");
    fs::copy_file(art.first_seal, dir / "good.png");
    gl::write_file_atomic((dir / "broken.png").string(), "this is not an image");

    const fs::path out = scratch_dir("run_mixed_out");
    const CmdResult r = run_cli({"run", dir.string(), "--stage", "seal", "--out", out.string()});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_THAT(r.err, HasSubstr("skipped"));

    const json status = json::parse(r.out);
    EXPECT_EQ(status.at("inputs"), 2);
    EXPECT_EQ(status.at("failed"), 1);
    EXPECT_TRUE(fs::exists(out / "good.report.json"));

    bool saw_error_entry = false;
    for (const auto& entry : status.at("outputs"))
        if (entry.contains("error")) saw_error_entry = true;
    EXPECT_TRUE(saw_error_entry);
}

TEST(Stage, NamedGateMirrorsRunAndRejectsUnknownNames) {
    const Artifacts& art = shared_artifacts();
    const fs::path out = scratch_dir("stage_seal");
    const CmdResult r = run_cli({"stage", "seal", art.first_seal, "--out", out.string()});
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json report = json::parse(gl::read_file((out / "seal_0000.report.json").string()));
    expect_schema_valid(report, load_schema("report.schema.json"), "seal-gate report");
    EXPECT_TRUE(report.at("proposals").empty());  // later stages never ran
    EXPECT_GE(report.at("seal_box").at("w").get<int>(), 1);

    const CmdResult bad = run_cli({"stage", "banana", art.first_seal});
    EXPECT_EQ(bad.exit_code, 1);
    EXPECT_THAT(bad.err, HasSubstr("unknown stage name"));
}

TEST(Eval, EndToEndSummarizesACorpus) {
    const Artifacts& art = shared_artifacts();
    const CmdResult r = run_cli({"eval", "--e2e", "--data", (art.corpus / "manifest.json").string(),
                                 "--region-model", art.region_model, "--glyph-model",
                                 art.glyph_model});
    ASSERT_EQ(r.exit_code, 0) << r.err;

    const json result = json::parse(r.out);
    EXPECT_EQ(result.at("images"), 2);
    const json& text = result.at("text");
    EXPECT_EQ(text.at("full").get<int>() + text.at("partial").get<int>() +
                  text.at("none").get<int>(),
              2);
    const json& symbols = result.at("symbols");
    EXPECT_EQ(symbols.at("full").get<int>() + symbols.at("partial").get<int>() +
                  symbols.at("none").get<int>(),
              2);
    const double acc = result.at("matched_glyph_label_accuracy").get<double>();
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
    ASSERT_EQ(result.at("rows").size(), 2u);
    for (const auto& row : result.at("rows")) {
        EXPECT_TRUE(row.contains("input"));
        EXPECT_GE(row.at("text_iou").get<double>(), 0.0);
        EXPECT_EQ(row.at("glyphs_truth"), 3);
    }
}

}  // namespace
