// Release acceptance checks. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails. argv[1] must be
// the path to the lesionkit CLI binary (used by the pipeline determinism
// check).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lesionkit/balance.hpp"
#include "lesionkit/eval.hpp"
#include "lesionkit/fusion.hpp"
#include "lesionkit/manifest.hpp"
#include "lesionkit/preprocess.hpp"
#include "lesionkit/report.hpp"
#include "lesionkit/synth.hpp"
#include "support/oracles.hpp"

using namespace lesionkit;
using testsupport::fnv1a_file;
using testsupport::froc_oracle;
using testsupport::make_ann;
using testsupport::make_pred;
using testsupport::random_box;
using testsupport::read_file;
using testsupport::wbf_oracle;

namespace {

int g_failures = 0;

struct CheckFailure {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure{what};
}

void require_close(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol))
        throw CheckFailure{what + ": got " + format_double(got) + ", want " + format_double(want) + " +/- " +
                           format_double(tol)};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void run_criterion(int number, const std::string& label, void (*fn)()) {
    try {
        fn();
        std::cout << "PASS criterion " << number << ": " << label << "\n";
    } catch (const CheckFailure& f) {
        ++g_failures;
        std::cout << "FAIL criterion " << number << ": " << label << " -- " << f.what << "\n";
    } catch (const std::exception& e) {
        ++g_failures;
        std::cout << "FAIL criterion " << number << ": " << label << " -- unexpected exception: " << e.what()
                  << "\n";
    }
}

// ---------------------------------------------------------------------------
// 1. Body-part and size balancing equalize a 10,000-lesion skewed manifest
//    exactly, in under a second.

void criterion1() {
    SynthSpec spec;
    spec.seed = 424242;
    spec.num_patients = 5000;
    spec.lesions_weights = {0.0, 1.0}; // exactly 2 lesions per patient
    DatasetManifest m = generate_dataset(spec);
    require(m.size() == 10000, "manifest size " + std::to_string(m.size()) + " != 10000");

    std::map<int, std::size_t> in_by_label;
    std::size_t in_large = 0, in_small = 0;
    for (const auto& a : m.annotations) {
        ++in_by_label[label_code(*a.label)];
        (a.stratum() == SizeStratum::Large ? in_large : in_small)++;
    }
    std::size_t min_label = m.size();
    for (const auto& [code, n] : in_by_label) min_label = std::min(min_label, n);
    require(in_by_label.size() == 8, "expected all eight labels in the skewed manifest");
    require(in_large > 0 && in_small > 0, "expected both size strata in the manifest");

    auto start = std::chrono::steady_clock::now();
    DatasetManifest by_part = balance_by_bodypart(m, 7);
    DatasetManifest by_size = balance_by_size(m, 7);
    double elapsed = seconds_since(start);

    std::map<int, std::size_t> out_by_label;
    for (const auto& a : by_part.annotations) ++out_by_label[label_code(*a.label)];
    require(out_by_label.size() == 8, "balanced manifest lost a label class");
    for (const auto& [code, n] : out_by_label)
        require(n == min_label, "label " + std::to_string(code) + " count " + std::to_string(n) +
                                    " != minimum " + std::to_string(min_label));
    require(by_part.size() == 8 * min_label, "body-part total is not 8 * minimum");

    std::size_t out_large = 0, out_small = 0;
    for (const auto& a : by_size.annotations) (a.stratum() == SizeStratum::Large ? out_large : out_small)++;
    std::size_t min_stratum = std::min(in_large, in_small);
    require(out_large == min_stratum && out_small == min_stratum,
            "size strata " + std::to_string(out_large) + "/" + std::to_string(out_small) +
                " != " + std::to_string(min_stratum) + " each");

    require(elapsed < 1.0, "balancing took " + format_double(elapsed) + " s (limit 1 s)");
}

// ---------------------------------------------------------------------------
// 2. Lesion-count balancing: over 100 seeds on a 1,000-patient manifest, the
//    residual group imbalance stays below the largest patient of the larger
//    group, no patient is ever split, all in under five seconds.

void criterion2() {
    SynthSpec spec;
    spec.seed = 777;
    spec.num_patients = 1000;
    DatasetManifest m = generate_dataset(spec);

    std::map<std::string, std::size_t> in_sizes;
    for (const auto& a : m.annotations) ++in_sizes[a.patient_id];
    std::size_t g1 = 0, g2 = 0;
    for (const auto& [pid, n] : in_sizes) (lesion_count_group(n) == LesionCountGroup::G1 ? g1 : g2) += n;
    const bool g1_smaller = g1 <= g2;
    std::size_t max_larger = 0;
    for (const auto& [pid, n] : in_sizes) {
        bool larger = g1_smaller ? lesion_count_group(n) == LesionCountGroup::G2
                                 : lesion_count_group(n) == LesionCountGroup::G1;
        if (larger) max_larger = std::max(max_larger, n);
    }
    require(g1 > 0 && g2 > 0 && max_larger >= 3, "fixture must populate both groups");

    auto start = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        DatasetManifest out = balance_by_lesion_count(m, seed);
        std::map<std::string, std::size_t> out_sizes;
        std::size_t o1 = 0, o2 = 0;
        for (const auto& a : out.annotations) ++out_sizes[a.patient_id];
        for (const auto& [pid, n] : out_sizes) {
            require(n == in_sizes.at(pid), "patient " + pid + " was split");
            (lesion_count_group(in_sizes.at(pid)) == LesionCountGroup::G1 ? o1 : o2) += n;
        }
        std::size_t gap = o1 > o2 ? o1 - o2 : o2 - o1;
        require(gap <= max_larger - 1, "seed " + std::to_string(seed) + ": imbalance " + std::to_string(gap) +
                                           " exceeds bound " + std::to_string(max_larger - 1));
    }
    double elapsed = seconds_since(start);
    require(elapsed < 5.0, "100 seeds took " + format_double(elapsed) + " s (limit 5 s)");
}

// ---------------------------------------------------------------------------
// 3. Weighted boxes fusion matches an independent sequential-clustering
//    oracle on 1,000 random instances of up to 6 boxes, and reproduces the
//    two-box worked example.

void criterion3() {
    { // worked example: 0.9*[0,0,10,10] + 0.5*[2,0,12,10] at threshold 0.55
        std::vector<Prediction> in = {
            make_pred("k", BoundingBox(0, 0, 10, 10), BodyPartLabel::Lung, 0.9, "a"),
            make_pred("k", BoundingBox(2, 0, 12, 10), BodyPartLabel::Lung, 0.5, "b"),
        };
        auto out = wbf(in, FusionConfig{0.55, 2, ScoreMode::RescaledAverage});
        require(out.size() == 1, "worked example must fuse to one box");
        require_close(out[0].box.x1, 1.0 / 1.4, 1e-9, "worked example x1");
        require_close(out[0].box.y1, 0.0, 1e-9, "worked example y1");
        require_close(out[0].box.x2, 15.0 / 1.4, 1e-9, "worked example x2");
        require_close(out[0].box.y2, 10.0, 1e-9, "worked example y2");
        require_close(out[0].score, 0.7, 1e-12, "worked example score");
    }

    Rng rng(30303);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Prediction> in;
        std::size_t n = 1 + rng.below(6);
        for (std::size_t i = 0; i < n; ++i)
            in.push_back(make_pred("k", random_box(rng, 40.0),
                                   rng.bernoulli(0.75) ? BodyPartLabel::Lung : BodyPartLabel::Liver,
                                   rng.real_in(0.05, 1.0), "s" + std::to_string(rng.below(3))));
        FusionConfig cfg{rng.real_in(0.3, 0.7), 1 + static_cast<int>(rng.below(4)),
                         rng.bernoulli(0.5) ? ScoreMode::Average : ScoreMode::RescaledAverage};

        auto lib = wbf(in, cfg);
        auto ref = wbf_oracle(in, cfg);
        require(lib.size() == ref.size(), "trial " + std::to_string(trial) + ": cluster count mismatch");
        for (std::size_t i = 0; i < lib.size(); ++i) {
            require(lib[i].label == ref[i].label, "trial " + std::to_string(trial) + ": label mismatch");
            require_close(lib[i].score, ref[i].score, 1e-12, "trial " + std::to_string(trial) + ": score");
            require_close(lib[i].box.x1, ref[i].box.x1, 1e-9, "trial " + std::to_string(trial) + ": x1");
            require_close(lib[i].box.y1, ref[i].box.y1, 1e-9, "trial " + std::to_string(trial) + ": y1");
            require_close(lib[i].box.x2, ref[i].box.x2, 1e-9, "trial " + std::to_string(trial) + ": x2");
            require_close(lib[i].box.y2, ref[i].box.y2, 1e-9, "trial " + std::to_string(trial) + ": y2");
        }
    }
}

// ---------------------------------------------------------------------------
// 4. The single-pass FROC sweep equals an exhaustive per-threshold
//    re-evaluation on 500 random instances (<= 10 GTs, <= 20 predictions),
//    at operating points 0.5/1/2/4 FP per image, exactly.

void criterion4() {
    Rng rng(40404);
    EvalConfig cfg;
    cfg.fp_per_image = {0.5, 1.0, 2.0, 4.0};

    for (int trial = 0; trial < 500; ++trial) {
        std::map<std::string, std::vector<LesionAnnotation>> gts_by_image;
        std::map<std::string, std::vector<Prediction>> preds_by_image;
        int n_images = 1 + static_cast<int>(rng.below(4));
        int total_gt = 0, total_pred = 0, gid = 0;
        for (int i = 0; i < n_images; ++i) {
            std::string patient = "P" + std::to_string(i);
            std::string key = patient + "/ST1/1/100";
            preds_by_image[key];
            int n_gt = 1 + static_cast<int>(rng.below(3));
            for (int g = 0; g < n_gt && total_gt < 10; ++g, ++total_gt) {
                double x = 50.0 * g;
                BodyPartLabel label = rng.bernoulli(0.5) ? BodyPartLabel::Lung : BodyPartLabel::Liver;
                gts_by_image[key].push_back(
                    make_ann("G" + std::to_string(gid++), patient, BoundingBox(x, 0, x + 30, 30), label));
                int n_pred = static_cast<int>(rng.below(3));
                for (int p = 0; p < n_pred && total_pred < 20; ++p, ++total_pred) {
                    double dx = rng.real_in(-20, 20), dy = rng.real_in(-20, 20);
                    BodyPartLabel plabel = rng.bernoulli(0.8) ? label : BodyPartLabel::Liver;
                    preds_by_image[key].push_back(
                        make_pred(key, BoundingBox(x + dx, dy, x + 30 + dx, 30 + dy), plabel, rng.unit()));
                }
            }
            if (gts_by_image[key].empty())
                gts_by_image[key].push_back(
                    make_ann("G" + std::to_string(gid++), patient, BoundingBox(0, 0, 30, 30), BodyPartLabel::Lung));
        }

        std::vector<MatchResult> matches;
        for (const auto& [key, gts] : gts_by_image)
            matches.push_back(match_image(gts, preds_by_image.at(key), cfg, true));

        auto lib = froc(matches, cfg);
        auto ref = froc_oracle(gts_by_image, preds_by_image, cfg);
        for (std::size_t i = 0; i < ref.sens_at.size(); ++i) {
            require(lib.at_points[i].sensitivity.has_value(), "sensitivity must be defined");
            require(*lib.at_points[i].sensitivity == ref.sens_at[i],
                    "trial " + std::to_string(trial) + ", point " + format_double(cfg.fp_per_image[i]) +
                        ": sweep " + format_double(*lib.at_points[i].sensitivity) + " != oracle " +
                        format_double(ref.sens_at[i]));
        }
    }
}

// ---------------------------------------------------------------------------
// 5. A simulated detector planted at 0.8 per-class sensitivity and 1 FP per
//    image over 2,000 images measures back at 0.8 +/- 0.02 for every class;
//    a perfect detector measures exactly 1.0. Under 30 seconds.

SynthSpec criterion5_spec() {
    SynthSpec spec;
    spec.seed = 50505;
    spec.num_patients = 2000;
    spec.lesions_weights = {0, 0, 0, 0, 0, 0, 0, 1.0}; // 8 lesions per patient
    spec.max_lesions_per_slice = 8;                    // all on one slice -> 2,000 images
    spec.label_weights = {1, 1, 1, 1, 1, 1, 1, 1};     // ~2,000 lesions per class
    spec.sad_min_mm = 4.0;
    spec.sad_max_mm = 12.0; // small boxes keep eight-per-slice placement easy
    return spec;
}

void criterion5() {
    auto start = std::chrono::steady_clock::now();
    SynthSpec spec = criterion5_spec();
    DatasetManifest m = generate_dataset(spec);

    std::set<std::string> keys;
    for (const auto& a : m.annotations) keys.insert(a.image_key());
    require(keys.size() == 2000, "expected 2000 images, got " + std::to_string(keys.size()));
    require(m.size() == 16000, "expected 16000 lesions, got " + std::to_string(m.size()));

    EvalConfig cfg;
    cfg.threads = 4;

    auto preds = generate_predictions(m, spec, 0, "det0");
    auto report = stratified_report({FoldInput{m.annotations, preds}}, cfg);
    for (BodyPartLabel label : kAllLabels) {
        const auto& st = report.mean.per_class.at(label_code(label)).at("all").at("4");
        require(st.sensitivity.has_value(), "class sensitivity must be defined");
        require_close(*st.sensitivity, 0.8, 0.02,
                      std::string("sensitivity@4FP for ") + std::string(label_name(label)));
    }

    SynthSpec perfect = spec;
    perfect.planted_sensitivity.fill(1.0);
    perfect.planted_fp_rate = 0.0;
    auto perfect_preds = generate_predictions(m, perfect, 0, "det0");
    auto perfect_report = stratified_report({FoldInput{m.annotations, perfect_preds}}, cfg);
    for (BodyPartLabel label : kAllLabels) {
        const auto& st = perfect_report.mean.per_class.at(label_code(label)).at("all").at("4");
        require(st.sensitivity.has_value() && *st.sensitivity == 1.0,
                std::string("perfect detector must score exactly 1.0 for ") + std::string(label_name(label)));
    }

    double elapsed = seconds_since(start);
    require(elapsed < 30.0, "took " + format_double(elapsed) + " s (limit 30 s)");
}

// ---------------------------------------------------------------------------
// 6. Geometry property suite: IoU symmetry/bounds/identity, exact window
//    edge mapping with monotonicity over the full HU ramp, and box rescaling
//    that round-trips within 1e-9.

void criterion6() {
    Rng rng(60606);
    for (int i = 0; i < 500; ++i) {
        BoundingBox a = random_box(rng), b = random_box(rng);
        double v = iou(a, b);
        require(v >= 0.0 && v <= 1.0, "iou out of [0,1]");
        require(iou(b, a) == v, "iou asymmetric");
        require(iou(a, a) == 1.0, "self iou != 1");
        require(a == b || iou(a, b) < 1.0 || a.area() == b.area(), "distinct boxes with iou 1");
    }

    std::vector<std::int16_t> ramp(4096);
    for (int i = 0; i < 4096; ++i) ramp[i] = static_cast<std::int16_t>(i - 1024);
    WindowedSlice w = window_hu(HuSlice(4096, 1, std::move(ramp)), 50.0, 400.0);
    auto at_hu = [&](int hu) { return w.data[hu + 1024]; };
    require(at_hu(-1024) == 0 && at_hu(-150) == 0, "values at or below the window floor must map to 0");
    require(at_hu(-149) == 1, "first value inside the window must map to 1");
    require(at_hu(250) == 255 && at_hu(3071) == 255, "values at or above the window ceiling must map to 255");
    for (int i = 1; i < 4096; ++i)
        require(w.data[i] >= w.data[i - 1], "windowing must be monotone in HU");

    for (int i = 0; i < 200; ++i) {
        double x1 = rng.real_in(0, 400), y1 = rng.real_in(0, 400);
        BoundingBox orig(x1, y1, x1 + rng.real_in(0.1, 100), y1 + rng.real_in(0.1, 100));
        BoundingBox back = rescale_box(rescale_box(orig, 512, 512, 768, 384), 768, 384, 512, 512);
        require(std::abs(back.x1 - orig.x1) < 1e-9 && std::abs(back.y1 - orig.y1) < 1e-9 &&
                    std::abs(back.x2 - orig.x2) < 1e-9 && std::abs(back.y2 - orig.y2) < 1e-9,
                "rescale round-trip drift exceeds 1e-9");
    }
}

// ---------------------------------------------------------------------------
// 7. Pipeline determinism: the same synth -> ingest -> split -> balance ->
//    window -> stack -> fuse -> evaluate -> report run, executed twice
//    through the CLI, produces byte-identical outputs.

std::string g_cli_path;

void run_cli(const std::filesystem::path& dir, const std::string& args) {
    std::string cmd = "cd '" + dir.string() + "' && '" + g_cli_path + "' " + args + " >cli.out 2>>cli.err";
    int rc = std::system(cmd.c_str());
    require(rc == 0, "command failed (" + std::to_string(rc) + "): " + args);
}

void criterion7() {
    require(!g_cli_path.empty(), "CLI path missing: pass it as argv[1]");
    namespace fs = std::filesystem;

    const std::string spec_json = R"({"seed": 11, "num_patients": 40})";
    auto run_pipeline = [&](const fs::path& dir) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "spec.json") << spec_json;

        run_cli(dir, "synth --spec spec.json --out-manifest synth.csv"
                     " --out-pred det0.jsonl --out-pred det1.jsonl --out-pred det2.jsonl"
                     " --out-spec spec_out.json --hu-key P00001/ST1/1/100 --out-hu phantom.hus");
        run_cli(dir, "ingest --in synth.csv --out curated.csv --first-visit-only --labeled-only");
        run_cli(dir, "split --in curated.csv --out-dir . --fractions 0.6 0.2 0.2 --seed 7");
        run_cli(dir, "balance --strategy bodypart --seed 7 --in train.csv --out train_bp.csv");
        run_cli(dir, "balance --strategy size --seed 7 --in train.csv --out train_sz.csv");
        run_cli(dir, "window --in phantom.hus --out phantom.win --center 50 --width 400 --resize 512");
        run_cli(dir, "stack --key phantom.win --out stack.bin --key-slice-index 100");
        run_cli(dir, "fuse --in det0.jsonl --in det1.jsonl --in det2.jsonl --out fused.jsonl --num-sources 3");
        run_cli(dir, "evaluate --gt curated.csv --pred fused.jsonl --json eval.json --text eval.txt");
        run_cli(dir, "report --pred fused.jsonl --manifest curated.csv --study ST1 --out lesions.txt");
        run_cli(dir, "report --pred fused.jsonl --manifest curated.csv --study ST1 --format json --out lesions.json");
    };

    const std::vector<std::string> outputs = {
        "synth.csv",    "det0.jsonl", "det1.jsonl", "det2.jsonl", "spec_out.json", "phantom.hus",
        "curated.csv",  "train.csv",  "val.csv",    "test.csv",   "train_bp.csv",  "train_sz.csv",
        "phantom.win",  "stack.bin",  "fused.jsonl", "eval.json", "eval.txt",      "lesions.txt",
        "lesions.json",
    };

    fs::path run1 = "accept_run1", run2 = "accept_run2";
    run_pipeline(run1);
    run_pipeline(run2);
    for (const auto& name : outputs) {
        auto h1 = fnv1a_file((run1 / name).string());
        auto h2 = fnv1a_file((run2 / name).string());
        require(h1 == h2, name + " differs between runs");
    }
}

// ---------------------------------------------------------------------------
// 8. The three golden findings-text fixtures render byte-for-byte, enforcing
//    the top-3 cap and the 50% confidence floor.

void criterion8() {
    const std::string golden = LESIONKIT_GOLDEN_DIR;

    DatasetManifest m;
    m.annotations = {
        make_ann("A1", "P7", BoundingBox(10, 10, 30, 30), BodyPartLabel::Lung, 20, 1, 134, "ST4", 1, "2"),
        make_ann("A2", "P7", BoundingBox(10, 10, 30, 30), BodyPartLabel::Liver, 20, 1, 88, "ST4", 1, "2"),
        make_ann("A3", "P7", BoundingBox(10, 10, 30, 30), BodyPartLabel::Bone, 20, 1, 52, "ST4", 1, "3"),
    };
    auto index = build_index(m);
    std::vector<Prediction> five = {
        make_pred("P7/ST4/2/134", BoundingBox(10, 20, 110, 140), BodyPartLabel::Lung, 0.97),
        make_pred("P7/ST4/2/88", BoundingBox(40.5, 60.5, 90, 120.5), BodyPartLabel::Liver, 0.88),
        make_pred("P7/ST4/3/52", BoundingBox(12, 14.5, 40, 44), BodyPartLabel::Mediastinum, 0.61),
        make_pred("P7/ST4/2/88", BoundingBox(200, 200, 230, 230), BodyPartLabel::Bone, 0.55),
        make_pred("P7/ST4/2/134", BoundingBox(300, 300, 320, 330), BodyPartLabel::Kidney, 0.40),
    };
    auto three = build_lesions_section(five, index);
    require(three.entries.size() == 3, "five candidates must yield exactly three entries");
    require(render_text(three) == read_file(golden + "/lesions_three.txt"), "three-entry golden mismatch");

    DatasetManifest km;
    km.annotations = {make_ann("A1", "P3", BoundingBox(10, 10, 30, 30), BodyPartLabel::Kidney, 20, 1, 12, "ST1")};
    auto one = build_lesions_section(
        {make_pred("P3/ST1/1/12", BoundingBox(5, 6, 25, 30), BodyPartLabel::Kidney, 0.505)}, build_index(km));
    require(render_text(one) == read_file(golden + "/lesions_one.txt"), "one-entry golden mismatch");

    auto empty = build_lesions_section({}, index);
    require(render_text(empty) == read_file(golden + "/lesions_empty.txt"), "empty golden mismatch");
}

// ---------------------------------------------------------------------------
// 9. Localization-only confusion: the matrix total equals the localized pair
//    count, and a planted Abdomen-called-Liver lands in row 2, column 4.

void criterion9() {
    EvalConfig cfg; // class_aware_matching is irrelevant; matching below is explicit
    std::vector<MatchResult> matches;

    std::vector<LesionAnnotation> g1 = {make_ann("G1", "P1", BoundingBox(0, 0, 30, 30), BodyPartLabel::Abdomen)};
    matches.push_back(match_image(
        g1, {make_pred("P1/ST1/1/100", BoundingBox(2, 2, 32, 32), BodyPartLabel::Liver, 0.9)}, cfg, false));

    std::vector<LesionAnnotation> g2 = {make_ann("G2", "P2", BoundingBox(0, 0, 30, 30), BodyPartLabel::Lung)};
    matches.push_back(match_image(
        g2, {make_pred("P2/ST1/1/100", BoundingBox(0, 0, 30, 30), BodyPartLabel::Lung, 0.8)}, cfg, false));

    std::vector<LesionAnnotation> g3 = {make_ann("G3", "P3", BoundingBox(0, 0, 30, 30), BodyPartLabel::Bone)};
    matches.push_back(match_image(
        g3, {make_pred("P3/ST1/1/100", BoundingBox(200, 200, 230, 230), BodyPartLabel::Bone, 0.7)}, cfg, false));

    auto conf = confusion_matrix(matches, cfg, 4.0);

    long long localized = 0;
    for (const auto& mr : matches)
        for (const auto& pr : mr.preds)
            if (pr.gt) ++localized;
    require(localized == 2, "fixture must localize exactly two pairs");
    require(conf.total == localized, "confusion total " + std::to_string(conf.total) + " != localized pairs " +
                                         std::to_string(localized));
    long long cells_sum = 0;
    for (const auto& row : conf.cells)
        for (long long c : row) cells_sum += c;
    require(cells_sum == conf.total, "cell sum != total");
    require(conf.cells[1][3] == 1, "Abdomen GT called Liver must land in row 2, column 4");
    require(conf.cells[4][4] == 1, "correct Lung call must land on the diagonal");
}

// ---------------------------------------------------------------------------
// 10. Evaluating ~100,000 predictions across 10,000 images finishes within
//     five seconds.

void criterion10() {
    SynthSpec spec;
    spec.seed = 101010;
    spec.num_patients = 5000;
    spec.lesions_weights = {0.0, 1.0}; // 2 lesions -> 2 single-lesion images per patient
    spec.planted_sensitivity.fill(1.0);
    spec.planted_fp_rate = 9.0; // ~90k decoys + 10k hits
    DatasetManifest m = generate_dataset(spec);
    auto preds = generate_predictions(m, spec, 0, "det0");

    std::set<std::string> keys;
    for (const auto& a : m.annotations) keys.insert(a.image_key());
    require(keys.size() == 10000, "expected 10000 images, got " + std::to_string(keys.size()));
    require(preds.size() > 95000 && preds.size() < 105000,
            "expected ~100k predictions, got " + std::to_string(preds.size()));

    EvalConfig cfg;
    cfg.threads = 4;
    auto start = std::chrono::steady_clock::now();
    auto report = stratified_report({FoldInput{m.annotations, preds}}, cfg);
    double elapsed = seconds_since(start);

    require(report.mean.num_images == 10000, "report image count mismatch");
    require(elapsed < 5.0, "evaluation took " + format_double(elapsed) + " s (limit 5 s)");
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];

    run_criterion(1, "body-part and size balancing equalize a 10k-lesion manifest exactly in < 1 s", criterion1);
    run_criterion(2, "lesion-count packing bound holds across 100 seeds on 1,000 patients in < 5 s", criterion2);
    run_criterion(3, "weighted boxes fusion matches the clustering oracle on 1,000 instances", criterion3);
    run_criterion(4, "FROC sweep equals exhaustive per-threshold re-evaluation on 500 instances", criterion4);
    run_criterion(5, "planted 0.8/1FP detector measures 0.8 +/- 0.02 per class; perfect one measures 1.0",
                  criterion5);
    run_criterion(6, "IoU, HU-window, and box-rescale property suites hold", criterion6);
    run_criterion(7, "full CLI pipeline is byte-identical across repeated runs", criterion7);
    run_criterion(8, "findings text matches the golden fixtures byte-for-byte", criterion8);
    run_criterion(9, "localization-only confusion totals match and cross-label cells land correctly", criterion9);
    run_criterion(10, "evaluating 100k predictions over 10k images finishes in < 5 s", criterion10);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
