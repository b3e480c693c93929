#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesionkit/fusion.hpp"
#include "lesionkit/manifest.hpp"
#include "lesionkit/preprocess.hpp"
#include "lesionkit/rng.hpp"

namespace lesionkit {

/// Everything the generator needs; a pure function of this struct decides
/// the whole dataset. Index i of a *_weights vector is the weight of the
/// value i+1; weights need not be normalized.
struct SynthSpec {
    std::uint64_t seed = 1;
    int num_patients = 50;
    std::vector<double> visits_weights = {1.0};
    std::vector<double> lesions_weights = {0.35, 0.30, 0.20, 0.10, 0.05};
    // Label skew shaped like DeepLesion: lung/abdomen heavy, bone/kidney light.
    std::array<double, 8> label_weights = {0.03, 0.19, 0.15, 0.14, 0.26, 0.06, 0.08, 0.09};
    double sad_min_mm = 4.0;
    double sad_max_mm = 40.0;
    double spacing_min = 0.6;
    double spacing_max = 1.0;
    int image_width = 512;
    int image_height = 512;
    int max_lesions_per_slice = 1;
    double unlabeled_fraction = 0.0;
    std::array<double, 8> planted_sensitivity = {0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8};
    double planted_fp_rate = 1.0;
    double tp_score_min = 0.55;
    double tp_score_max = 0.99;
    double fp_score_min = 0.05;
    double fp_score_max = 0.60;

    void validate() const {
        auto weights_ok = [](const auto& w) {
            double sum = 0;
            for (double v : w) {
                if (!(v >= 0)) return false;
                sum += v;
            }
            return sum > 0;
        };
        if (num_patients < 1) throw SpecError("num_patients must be at least 1");
        if (visits_weights.empty() || !weights_ok(visits_weights)) throw SpecError("bad visits_weights");
        if (lesions_weights.empty() || !weights_ok(lesions_weights)) throw SpecError("bad lesions_weights");
        if (!weights_ok(label_weights)) throw SpecError("bad label_weights");
        if (!(sad_min_mm > 0) || !(sad_max_mm >= sad_min_mm)) throw SpecError("bad SAD range");
        if (!(spacing_min > 0) || !(spacing_max >= spacing_min)) throw SpecError("bad spacing range");
        if (image_width < 32 || image_height < 32) throw SpecError("image dimensions must be at least 32");
        if (max_lesions_per_slice < 1) throw SpecError("max_lesions_per_slice must be at least 1");
        if (!(unlabeled_fraction >= 0 && unlabeled_fraction <= 1)) throw SpecError("bad unlabeled_fraction");
        for (double s : planted_sensitivity)
            if (!(s >= 0 && s <= 1)) throw SpecError("planted_sensitivity values must lie in [0,1]");
        if (!(planted_fp_rate >= 0)) throw SpecError("planted_fp_rate must be nonnegative");
        auto range_ok = [](double lo, double hi) { return lo >= 0 && hi <= 1 && lo <= hi; };
        if (!range_ok(tp_score_min, tp_score_max) || !range_ok(fp_score_min, fp_score_max))
            throw SpecError("score ranges must satisfy 0 <= min <= max <= 1");
        // Largest possible long axis (mm -> px at the finest spacing), plus
        // placement margin, must fit the slice.
        double longest_px = 2.0 * sad_max_mm / spacing_min;
        if (longest_px + 6.0 > std::min(image_width, image_height))
            throw SpecError("image too small for the largest lesion at the finest spacing");
    }
};

namespace detail {

inline std::string pad_id(const char* prefix, int value, int width) {
    std::string digits = std::to_string(value);
    std::string out(prefix);
    out.append(width > static_cast<int>(digits.size()) ? width - digits.size() : 0, '0');
    out += digits;
    return out;
}

inline BoundingBox clamp_box(double x1, double y1, double x2, double y2, int w, int h) {
    auto clamp = [](double v, double hi) { return v < 0.0 ? 0.0 : (v > hi ? hi : v); };
    return BoundingBox(clamp(x1, w), clamp(y1, h), clamp(x2, w), clamp(y2, h));
}

} // namespace detail

// Deterministic manifest. Each patient gets one study per visit, one series
// per study; lesions fill slices left to right with pairwise GT overlap kept
// under 0.05 IoU so later prediction planting cannot cross-match.
inline DatasetManifest generate_dataset(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    DatasetManifest out;
    out.provenance.push_back("synth seed=" + std::to_string(spec.seed) +
                             " patients=" + std::to_string(spec.num_patients));

    std::vector<double> labels(spec.label_weights.begin(), spec.label_weights.end());
    int lesion_counter = 0;
    for (int p = 0; p < spec.num_patients; ++p) {
        std::string patient = detail::pad_id("P", p + 1, 5);
        int visits = 1 + static_cast<int>(rng.categorical(spec.visits_weights));
        for (int v = 1; v <= visits; ++v) {
            std::string study = "ST" + std::to_string(v);
            double spacing = rng.real_in(spec.spacing_min, spec.spacing_max);
            int lesions = 1 + static_cast<int>(rng.categorical(spec.lesions_weights));
            int slice = 100;
            int on_slice = 0;
            std::vector<BoundingBox> slice_boxes;
            for (int l = 0; l < lesions; ++l) {
                if (on_slice >= spec.max_lesions_per_slice) {
                    slice += 3; // leave UNWINDOWED neighbors free for 2.5D stacks
                    on_slice = 0;
                    slice_boxes.clear();
                }
                double sad = rng.real_in(spec.sad_min_mm, spec.sad_max_mm);
                double short_px = sad / spacing;
                double long_px = short_px * rng.real_in(1.0, 2.0);
                double theta = rng.real_in(0.15, 1.42);
                double margin = long_px / 2.0 + 2.0;

                std::optional<RecistMeasurement> recist;
                std::optional<BoundingBox> box;
                for (int attempt = 0; attempt < 64 && !box; ++attempt) {
                    double cx = rng.real_in(margin, spec.image_width - margin);
                    double cy = rng.real_in(margin, spec.image_height - margin);
                    double lc = std::cos(theta), ls = std::sin(theta);
                    RecistMeasurement m{{cx - long_px / 2 * lc, cy - long_px / 2 * ls},
                                        {cx + long_px / 2 * lc, cy + long_px / 2 * ls},
                                        {cx + short_px / 2 * ls, cy - short_px / 2 * lc},
                                        {cx - short_px / 2 * ls, cy + short_px / 2 * lc}};
                    BoundingBox hull = box_from_recist(m, 0.0);
                    bool clear = true;
                    for (const auto& other : slice_boxes)
                        if (iou(hull, other) >= 0.05) clear = false;
                    if (!clear) continue;
                    recist = m;
                    box = hull;
                }
                if (!box) { // crowded slice: start a fresh one and retry
                    slice += 3;
                    on_slice = 0;
                    slice_boxes.clear();
                    --l;
                    continue;
                }
                std::optional<BodyPartLabel> label;
                if (rng.unit() >= spec.unlabeled_fraction)
                    label = *label_from_code(1 + static_cast<int>(rng.categorical(labels)));
                slice_boxes.push_back(*box);
                ++on_slice;
                out.annotations.push_back(LesionAnnotation{
                    .lesion_id = detail::pad_id("L", ++lesion_counter, 6),
                    .patient_id = patient,
                    .study_id = study,
                    .visit_index = v,
                    .series_id = "1",
                    .slice_index = slice,
                    .image_width = spec.image_width,
                    .image_height = spec.image_height,
                    .spacing_mm_per_px = spacing,
                    .recist = *recist,
                    .box = *box,
                    .label = label,
                    .window_center = 50.0,
                    .window_width = 400.0,
                });
            }
        }
    }
    return out;
}

// One simulated detector pass. Each labeled GT is found with its class's
// planted probability; the reported box jitters every corner by up to 10%
// of the smaller GT dimension, which keeps IoU with its own GT at or above
// (0.8/1.2)^2 ~ 0.44 and is re-drawn if it strays within 0.3 of any other
// GT. False positives arrive per image at a Poisson rate and are placed so
// they overlap no GT at 0.3 IoU. salt picks the detector (independent
// stream per simulated source).
inline std::vector<Prediction> generate_predictions(const DatasetManifest& m, const SynthSpec& spec,
                                                    std::uint64_t salt = 0,
                                                    const std::string& source_id = "det0") {
    spec.validate();
    if (m.empty()) throw SpecError("cannot plant predictions in an empty manifest");
    Rng rng = Rng::derive(spec.seed, 0x70726564u + salt);
    std::vector<double> labels(spec.label_weights.begin(), spec.label_weights.end());

    std::vector<std::string> keys; // first-appearance order
    std::map<std::string, std::vector<const LesionAnnotation*>> by_image;
    for (const auto& a : m.annotations) {
        auto [it, fresh] = by_image.try_emplace(a.image_key());
        if (fresh) keys.push_back(a.image_key());
        it->second.push_back(&a);
    }

    std::vector<Prediction> out;
    for (const auto& key : keys) {
        const auto& gts = by_image[key];
        for (const LesionAnnotation* gt : gts) {
            if (!gt->label) continue; // nothing to report a class for
            if (!rng.bernoulli(spec.planted_sensitivity[label_code(*gt->label) - 1])) continue;
            double d = 0.1 * std::min(gt->box.width(), gt->box.height());
            BoundingBox box = gt->box;
            for (int attempt = 0; attempt < 50; ++attempt) {
                BoundingBox cand = detail::clamp_box(
                    gt->box.x1 + rng.real_in(-d, d), gt->box.y1 + rng.real_in(-d, d),
                    gt->box.x2 + rng.real_in(-d, d), gt->box.y2 + rng.real_in(-d, d), gt->image_width,
                    gt->image_height);
                if (iou(cand, gt->box) <= 0.35) continue;
                bool clear = true;
                for (const LesionAnnotation* other : gts)
                    if (other != gt && iou(cand, other->box) >= 0.3) clear = false;
                if (!clear) continue;
                box = cand;
                break;
            }
            out.push_back({key, box, *gt->label, rng.real_in(spec.tp_score_min, spec.tp_score_max), source_id});
        }
        int width = gts.front()->image_width, height = gts.front()->image_height;
        long long nfp = rng.poisson(spec.planted_fp_rate);
        for (long long f = 0; f < nfp; ++f) {
            for (int attempt = 0; attempt < 200; ++attempt) {
                double w = rng.real_in(10.0, 80.0);
                double h = rng.real_in(10.0, 80.0);
                double x1 = rng.real_in(0.0, width - w);
                double y1 = rng.real_in(0.0, height - h);
                BoundingBox cand(x1, y1, x1 + w, y1 + h);
                bool clear = true;
                for (const LesionAnnotation* gt : gts)
                    if (iou(cand, gt->box) >= 0.3) clear = false;
                if (!clear) continue;
                out.push_back({key, cand, *label_from_code(1 + static_cast<int>(rng.categorical(labels))),
                               rng.real_in(spec.fp_score_min, spec.fp_score_max), source_id});
                break;
            }
        }
    }
    return out;
}

/// Geometric phantom for one slice: an HU gradient spanning air to bone,
/// with lesion interiors held at soft-tissue density. Enough structure to
/// exercise windowing and stacking, nothing more.
inline HuSlice synth_hu_slice(int width, int height, const std::vector<BoundingBox>& lesions) {
    std::vector<std::int16_t> px(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            px[static_cast<std::size_t>(y) * width + x] = static_cast<std::int16_t>(-1000 + (x * 7 + y * 13) % 1500);
    for (const auto& box : lesions) {
        int x1 = std::max(0, static_cast<int>(box.x1)), x2 = std::min(width, static_cast<int>(box.x2) + 1);
        int y1 = std::max(0, static_cast<int>(box.y1)), y2 = std::min(height, static_cast<int>(box.y2) + 1);
        for (int y = y1; y < y2; ++y)
            for (int x = x1; x < x2; ++x)
                px[static_cast<std::size_t>(y) * width + x] = static_cast<std::int16_t>(40 + x % 20);
    }
    return HuSlice(width, height, std::move(px));
}

inline nlohmann::ordered_json spec_to_json(const SynthSpec& s) {
    nlohmann::ordered_json j;
    j["seed"] = s.seed;
    j["num_patients"] = s.num_patients;
    j["visits_weights"] = s.visits_weights;
    j["lesions_weights"] = s.lesions_weights;
    j["label_weights"] = s.label_weights;
    j["sad_min_mm"] = s.sad_min_mm;
    j["sad_max_mm"] = s.sad_max_mm;
    j["spacing_min"] = s.spacing_min;
    j["spacing_max"] = s.spacing_max;
    j["image_width"] = s.image_width;
    j["image_height"] = s.image_height;
    j["max_lesions_per_slice"] = s.max_lesions_per_slice;
    j["unlabeled_fraction"] = s.unlabeled_fraction;
    j["planted_sensitivity"] = s.planted_sensitivity;
    j["planted_fp_rate"] = s.planted_fp_rate;
    j["tp_score_min"] = s.tp_score_min;
    j["tp_score_max"] = s.tp_score_max;
    j["fp_score_min"] = s.fp_score_min;
    j["fp_score_max"] = s.fp_score_max;
    return j;
}

/// Defaults overlaid with whatever keys the JSON provides.
inline SynthSpec spec_from_json(const nlohmann::ordered_json& j) {
    SynthSpec s;
    try {
        s.seed = j.value("seed", s.seed);
        s.num_patients = j.value("num_patients", s.num_patients);
        s.visits_weights = j.value("visits_weights", s.visits_weights);
        s.lesions_weights = j.value("lesions_weights", s.lesions_weights);
        s.label_weights = j.value("label_weights", s.label_weights);
        s.sad_min_mm = j.value("sad_min_mm", s.sad_min_mm);
        s.sad_max_mm = j.value("sad_max_mm", s.sad_max_mm);
        s.spacing_min = j.value("spacing_min", s.spacing_min);
        s.spacing_max = j.value("spacing_max", s.spacing_max);
        s.image_width = j.value("image_width", s.image_width);
        s.image_height = j.value("image_height", s.image_height);
        s.max_lesions_per_slice = j.value("max_lesions_per_slice", s.max_lesions_per_slice);
        s.unlabeled_fraction = j.value("unlabeled_fraction", s.unlabeled_fraction);
        s.planted_sensitivity = j.value("planted_sensitivity", s.planted_sensitivity);
        s.planted_fp_rate = j.value("planted_fp_rate", s.planted_fp_rate);
        s.tp_score_min = j.value("tp_score_min", s.tp_score_min);
        s.tp_score_max = j.value("tp_score_max", s.tp_score_max);
        s.fp_score_min = j.value("fp_score_min", s.fp_score_min);
        s.fp_score_max = j.value("fp_score_max", s.fp_score_max);
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed synth spec JSON: ") + e.what());
    }
    s.validate();
    return s;
}

} // namespace lesionkit
