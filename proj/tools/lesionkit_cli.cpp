// Command-line front end: wires the manifest/balance/preprocess/fusion/eval
// modules together through files. Exit codes: 0 success, 1 usage error,
// 2 data error. Diagnostics go to stderr; data goes to files or stdout.

#include <array>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lesionkit/balance.hpp"
#include "lesionkit/eval.hpp"
#include "lesionkit/fusion.hpp"
#include "lesionkit/manifest.hpp"
#include "lesionkit/preprocess.hpp"
#include "lesionkit/report.hpp"
#include "lesionkit/synth.hpp"

using namespace lesionkit;

namespace {

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    return f;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
}

DatasetManifest load_manifest(const std::string& path, std::vector<std::string>* warnings = nullptr) {
    auto f = open_in(path);
    try {
        return parse_manifest(f, warnings);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    auto f = open_out(path);
    write_manifest(m, f);
    if (!f) throw IoError("failed while writing '" + path + "'");
}

std::vector<Prediction> load_predictions(const std::string& path) {
    auto f = open_in(path);
    try {
        return read_predictions_jsonl(f);
    } catch (const Error& e) {
        throw Error(path + ": " + std::string(e.what()));
    }
}

void save_predictions(const std::vector<Prediction>& preds, const std::string& path) {
    auto f = open_out(path);
    write_predictions_jsonl(preds, f);
    if (!f) throw IoError("failed while writing '" + path + "'");
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
    } else {
        auto f = open_out(path);
        f << text;
        if (!f) throw IoError("failed while writing '" + path + "'");
    }
}

// --- subcommand bodies ------------------------------------------------------

struct IngestArgs {
    std::string in, out;
    bool first_visit_only = false;
    bool labeled_only = false;
};

void run_ingest(const IngestArgs& a) {
    std::vector<std::string> warnings;
    DatasetManifest m = load_manifest(a.in, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << a.in << ": " << w << "\n";
    std::size_t parsed = m.size();
    if (a.first_visit_only) m = keep_first_visit(m);
    if (a.labeled_only) m = keep_labeled(m);
    save_manifest(m, a.out);
    std::cerr << "ingest: " << parsed << " rows read, " << m.size() << " kept, "
              << m.patient_ids().size() << " patients -> " << a.out << "\n";
}

struct SplitArgs {
    std::string in, out_dir;
    std::vector<double> fractions = {0.6, 0.2, 0.2};
    std::uint64_t seed = 1;
};

void run_split(const SplitArgs& a) {
    DatasetManifest m = load_manifest(a.in);
    DatasetManifest assigned =
        split_by_patient(m, {a.fractions[0], a.fractions[1], a.fractions[2]}, a.seed);
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        DatasetManifest sub = manifest_for_split(assigned, s);
        std::string path = a.out_dir + "/" + std::string(split_name(s)) + ".csv";
        save_manifest(sub, path);
        std::cerr << "split: " << split_name(s) << " " << sub.size() << " lesions -> " << path << "\n";
    }
}

struct BalanceArgs {
    std::string in, out, strategy = "unbalanced";
    std::uint64_t seed = 0;
    std::optional<std::size_t> target_total;
};

void run_balance(const BalanceArgs& a) {
    auto strategy = strategy_from_name(a.strategy);
    if (!strategy) throw Error("unknown strategy '" + a.strategy + "'");
    BalanceSpec spec{*strategy, a.seed, a.target_total};
    DatasetManifest out = apply_balance(load_manifest(a.in), spec);
    save_manifest(out, a.out);
    std::cerr << "balance: strategy " << strategy_name(*strategy) << ", " << out.size() << " lesions -> "
              << a.out << "\n";
}

struct WindowArgs {
    std::string in, out;
    double center = 0, width = 0;
    int resize = 0;
};

void run_window(const WindowArgs& a) {
    auto f = open_in(a.in, true);
    HuSlice hu = read_hu_slice(f);
    WindowedSlice w = window_hu(hu, a.center, a.width);
    if (a.resize > 0) w = resize_bilinear(w, a.resize, a.resize);
    auto out = open_out(a.out, true);
    write_windowed_slice(w, out);
    if (!out) throw IoError("failed while writing '" + a.out + "'");
    std::cerr << "window: " << w.width << "x" << w.height << " @ center " << format_double(a.center)
              << " width " << format_double(a.width) << " -> " << a.out << "\n";
}

struct StackArgs {
    std::string below, key, above, out;
    int key_slice_index = 0;
};

void run_stack(const StackArgs& a) {
    std::optional<WindowedSlice> below, above;
    if (!a.below.empty()) {
        auto f = open_in(a.below, true);
        below = read_windowed_slice(f);
    }
    if (!a.above.empty()) {
        auto f = open_in(a.above, true);
        above = read_windowed_slice(f);
    }
    auto kf = open_in(a.key, true);
    WindowedSlice key = read_windowed_slice(kf);
    Stack25D stack = stack_25d(below, key, above, a.key_slice_index);
    auto out = open_out(a.out, true);
    for (const auto& plane : stack.slices) write_windowed_slice(plane, out);
    if (!out) throw IoError("failed while writing '" + a.out + "'");
    std::cerr << "stack: 3 planes of " << key.width << "x" << key.height << " -> " << a.out << "\n";
}

struct FuseArgs {
    std::vector<std::string> inputs;
    std::string out;
    double iou_threshold = 0.55;
    int num_sources = 0; // 0: use the input file count
    std::string score_mode = "rescaled";
    double min_score = 0.0;
    int threads = 1;
};

void run_fuse(const FuseArgs& a) {
    FusionConfig cfg;
    cfg.iou_threshold = a.iou_threshold;
    cfg.num_sources = a.num_sources > 0 ? a.num_sources : static_cast<int>(a.inputs.size());
    if (a.score_mode == "average")
        cfg.score_mode = ScoreMode::Average;
    else if (a.score_mode == "rescaled")
        cfg.score_mode = ScoreMode::RescaledAverage;
    else
        throw Error("unknown score mode '" + a.score_mode + "'");

    std::vector<Prediction> all;
    for (const auto& path : a.inputs) {
        auto preds = load_predictions(path);
        all.insert(all.end(), preds.begin(), preds.end());
    }
    std::size_t before = all.size();
    std::vector<Prediction> fused = fuse_all(all, cfg, a.threads);
    if (a.min_score > 0) fused = filter_by_score(fused, a.min_score);
    save_predictions(fused, a.out);
    std::cerr << "fuse: " << before << " boxes from " << a.inputs.size() << " file(s) -> " << fused.size()
              << " fused -> " << a.out << "\n";
}

struct EvaluateArgs {
    std::vector<std::string> gts, preds;
    double iou_threshold = 0.3;
    std::vector<double> fp_points = {4.0};
    bool class_agnostic = false;
    bool no_size_strata = false;
    int threads = 1;
    std::string json_path, text_path, format = "text";
};

void run_evaluate(const EvaluateArgs& a) {
    EvalConfig cfg;
    cfg.iou_threshold = a.iou_threshold;
    cfg.fp_per_image = a.fp_points;
    cfg.class_aware_matching = !a.class_agnostic;
    cfg.size_strata_enabled = !a.no_size_strata;
    cfg.threads = a.threads;

    std::vector<std::string> gt_paths = a.gts;
    if (gt_paths.size() == 1 && a.preds.size() > 1) gt_paths.assign(a.preds.size(), gt_paths.front());

    std::vector<FoldInput> folds;
    for (std::size_t i = 0; i < gt_paths.size(); ++i)
        folds.push_back(FoldInput{load_manifest(gt_paths[i]).annotations, load_predictions(a.preds[i])});

    EvalReport report = stratified_report(folds, cfg);
    std::string text = render_report_text(report);
    std::string json = report_to_json(report).dump(2) + "\n";
    if (!a.json_path.empty()) emit(json, a.json_path);
    if (!a.text_path.empty()) emit(text, a.text_path);
    if (a.json_path.empty() && a.text_path.empty()) emit(a.format == "json" ? json : text, "");
    for (const auto& w : report.mean.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "evaluate: " << report.folds.size() << " fold(s), " << report.mean.num_images
              << " image(s), " << report.mean.num_gt << " lesion(s)\n";
}

struct ReportArgs {
    std::string pred, manifest, study, out, format = "text";
    double min_confidence = 0.5;
    int top_k = 3;
};

void run_report(const ReportArgs& a) {
    std::vector<Prediction> preds = load_predictions(a.pred);
    if (!a.study.empty()) {
        std::erase_if(preds, [&](const Prediction& p) {
            auto parts = split(p.image_key, '/');
            return parts.size() < 2 || std::string(parts[1]) != a.study;
        });
    }
    AnnotationsIndex index = build_index(load_manifest(a.manifest));
    LesionsSection section = build_lesions_section(std::move(preds), index, a.min_confidence, a.top_k,
                                                   {"predictions=" + a.pred});
    if (section.study_id.empty()) section.study_id = a.study;
    emit(a.format == "json" ? section_to_json(section).dump(2) + "\n" : render_text(section), a.out);
    std::cerr << "report: " << section.entries.size() << " entry(ies) for study '" << section.study_id
              << "'\n";
}

struct SynthArgs {
    std::string spec_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> patients;
    std::string out_manifest, out_spec;
    std::vector<std::string> out_preds;
    std::string source_prefix = "det";
    std::string hu_key, out_hu;
};

void run_synth(const SynthArgs& a) {
    SynthSpec spec;
    if (!a.spec_path.empty()) {
        auto f = open_in(a.spec_path);
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(a.spec_path + ": " + e.what());
        }
        spec = spec_from_json(j);
    }
    if (a.seed) spec.seed = *a.seed;
    if (a.patients) spec.num_patients = *a.patients;
    spec.validate();

    DatasetManifest m = generate_dataset(spec);
    if (!a.out_manifest.empty()) {
        save_manifest(m, a.out_manifest);
        std::cerr << "synth: " << m.size() << " lesions, " << m.patient_ids().size() << " patients -> "
                  << a.out_manifest << "\n";
    }
    for (std::size_t i = 0; i < a.out_preds.size(); ++i) {
        std::string source = a.source_prefix + std::to_string(i);
        auto preds = generate_predictions(m, spec, i, source);
        save_predictions(preds, a.out_preds[i]);
        std::cerr << "synth: " << preds.size() << " predictions from " << source << " -> " << a.out_preds[i]
                  << "\n";
    }
    if (!a.out_spec.empty()) emit(spec_to_json(spec).dump(2) + "\n", a.out_spec);
    if (!a.out_hu.empty()) {
        if (a.hu_key.empty()) throw Error("--out-hu requires --hu-key");
        std::vector<BoundingBox> boxes;
        for (const auto& ann : m.annotations)
            if (ann.image_key() == a.hu_key) boxes.push_back(ann.box);
        HuSlice hu = synth_hu_slice(spec.image_width, spec.image_height, boxes);
        auto out = open_out(a.out_hu, true);
        write_hu_slice(hu, out);
        if (!out) throw IoError("failed while writing '" + a.out_hu + "'");
        std::cerr << "synth: HU phantom for " << a.hu_key << " (" << boxes.size() << " lesion(s)) -> "
                  << a.out_hu << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lesion-detection data toolkit: manifests, balancing, preprocessing, fusion, evaluation"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Validate and normalize an annotation manifest");
    ingest->add_option("--in", ingest_args.in, "Input manifest CSV")->required();
    ingest->add_option("--out", ingest_args.out, "Normalized output CSV")->required();
    ingest->add_flag("--first-visit-only", ingest_args.first_visit_only,
                     "Keep only each patient's earliest visit");
    ingest->add_flag("--labeled-only", ingest_args.labeled_only, "Drop lesions without a body part label");
    ingest->callback([&] { run_ingest(ingest_args); });

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand("split", "Patient-disjoint train/val/test split");
    split_cmd->add_option("--in", split_args.in, "Input manifest CSV")->required();
    split_cmd->add_option("--out-dir", split_args.out_dir, "Directory for train.csv/val.csv/test.csv")
        ->required();
    split_cmd->add_option("--fractions", split_args.fractions, "Train/val/test fractions")
        ->expected(3)
        ->capture_default_str();
    split_cmd->add_option("--seed", split_args.seed, "Shuffle seed")->capture_default_str();
    split_cmd->callback([&] { run_split(split_args); });

    BalanceArgs balance_args;
    auto* balance = app.add_subcommand("balance", "Resample a training manifest with a balancing strategy");
    balance->add_option("--in", balance_args.in, "Input manifest CSV")->required();
    balance->add_option("--out", balance_args.out, "Balanced output CSV")->required();
    balance
        ->add_option("--strategy", balance_args.strategy,
                     "One of: unbalanced, bodypart, lesioncount, size")
        ->check(CLI::IsMember({"unbalanced", "bodypart", "lesioncount", "size"}))
        ->capture_default_str();
    balance->add_option("--seed", balance_args.seed, "Sampling seed")->capture_default_str();
    balance->add_option("--target-total", balance_args.target_total,
                        "Lesion count for the unbalanced strategy");
    balance->callback([&] { run_balance(balance_args); });

    WindowArgs window_args;
    auto* window = app.add_subcommand("window", "Apply an HU display window to a raw slice");
    window->add_option("--in", window_args.in, "Input HU slice (HUS1)")->required();
    window->add_option("--out", window_args.out, "Output windowed slice (WIN1)")->required();
    window->add_option("--center", window_args.center, "Window center in HU")->required();
    window->add_option("--width", window_args.width, "Window width in HU")->required();
    window->add_option("--resize", window_args.resize, "Bilinear-resize output to NxN (0 = off)")
        ->capture_default_str();
    window->callback([&] { run_window(window_args); });

    StackArgs stack_args;
    auto* stack = app.add_subcommand("stack", "Assemble a 2.5D stack from consecutive windowed slices");
    stack->add_option("--below", stack_args.below, "Slice below the key (optional; key is replicated)");
    stack->add_option("--key", stack_args.key, "Key slice (WIN1)")->required();
    stack->add_option("--above", stack_args.above, "Slice above the key (optional; key is replicated)");
    stack->add_option("--out", stack_args.out, "Output: three concatenated WIN1 records")->required();
    stack->add_option("--key-slice-index", stack_args.key_slice_index, "Volume index of the key slice")
        ->capture_default_str();
    stack->callback([&] { run_stack(stack_args); });

    FuseArgs fuse_args;
    auto* fuse = app.add_subcommand("fuse", "Weighted boxes fusion across prediction files");
    fuse->add_option("--in", fuse_args.inputs, "Prediction JSONL file (repeatable)")
        ->required()
        ->take_all();
    fuse->add_option("--out", fuse_args.out, "Fused predictions JSONL")->required();
    fuse->add_option("--iou-threshold", fuse_args.iou_threshold, "Cluster-joining IoU threshold")
        ->capture_default_str();
    fuse->add_option("--num-sources", fuse_args.num_sources,
                     "Source count N for score rescaling (default: number of input files)");
    fuse->add_option("--score-mode", fuse_args.score_mode, "average or rescaled")
        ->check(CLI::IsMember({"average", "rescaled"}))
        ->capture_default_str();
    fuse->add_option("--min-score", fuse_args.min_score, "Drop fused boxes below this score")
        ->capture_default_str();
    fuse->add_option("--threads", fuse_args.threads, "Worker threads (images are independent)")
        ->capture_default_str();
    fuse->callback([&] { run_fuse(fuse_args); });

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "FROC-style sensitivity report against ground truth");
    evaluate->add_option("--gt", eval_args.gts, "Ground-truth manifest CSV (one per fold, or one shared)")
        ->required()
        ->take_all();
    evaluate->add_option("--pred", eval_args.preds, "Prediction JSONL (one per fold)")
        ->required()
        ->take_all();
    evaluate->add_option("--iou-threshold", eval_args.iou_threshold, "Match IoU threshold")
        ->capture_default_str();
    evaluate->add_option("--fp-per-image", eval_args.fp_points, "FP/image operating points")
        ->capture_default_str();
    evaluate->add_flag("--class-agnostic", eval_args.class_agnostic,
                       "Match on localization only, ignoring labels");
    evaluate->add_flag("--no-size-strata", eval_args.no_size_strata, "Skip the SAD size breakdown");
    evaluate->add_option("--threads", eval_args.threads, "Worker threads")->capture_default_str();
    evaluate->add_option("--json", eval_args.json_path, "Write the JSON report here");
    evaluate->add_option("--text", eval_args.text_path, "Write the text tables here");
    evaluate->add_option("--format", eval_args.format, "Stdout format when no output file is given")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    evaluate->callback([&] {
        if (eval_args.gts.size() != eval_args.preds.size() && eval_args.gts.size() != 1)
            throw CLI::ValidationError("evaluate",
                                       "--gt count must equal --pred count, or be a single shared manifest");
        run_evaluate(eval_args);
    });

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "Render the Lesions sub-section for a study");
    report->add_option("--pred", report_args.pred, "Fused predictions JSONL")->required();
    report->add_option("--manifest", report_args.manifest, "Manifest CSV used to resolve series/slice")
        ->required();
    report->add_option("--study", report_args.study, "Restrict to this study id");
    report->add_option("--min-confidence", report_args.min_confidence, "Confidence floor")
        ->capture_default_str();
    report->add_option("--top-k", report_args.top_k, "Maximum entries")->capture_default_str();
    report->add_option("--out", report_args.out, "Output path (default: stdout)");
    report->add_option("--format", report_args.format, "text or json")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    report->callback([&] { run_report(report_args); });

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic dataset");
    synth->add_option("--spec", synth_args.spec_path, "Generator spec JSON (defaults apply otherwise)");
    synth->add_option("--seed", synth_args.seed, "Override the spec seed");
    synth->add_option("--patients", synth_args.patients, "Override the patient count");
    synth->add_option("--out-manifest", synth_args.out_manifest, "Write the manifest CSV here");
    synth->add_option("--out-pred", synth_args.out_preds,
                      "Write one simulated detector's predictions here (repeatable)");
    synth->add_option("--source-prefix", synth_args.source_prefix, "source_id prefix for detectors")
        ->capture_default_str();
    synth->add_option("--out-spec", synth_args.out_spec, "Dump the effective spec JSON here");
    synth->add_option("--hu-key", synth_args.hu_key, "image_key for --out-hu");
    synth->add_option("--out-hu", synth_args.out_hu, "Write an HU phantom slice (HUS1) here");
    synth->callback([&] { run_synth(synth_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
