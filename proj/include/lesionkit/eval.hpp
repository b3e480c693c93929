#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesionkit/fusion.hpp"
#include "lesionkit/manifest.hpp"
#include "lesionkit/util.hpp"

namespace lesionkit {

struct EvalConfig {
    double iou_threshold = 0.3;
    std::vector<double> fp_per_image = {4.0};
    bool class_aware_matching = true;
    bool size_strata_enabled = true;
    int threads = 1;

    void validate() const {
        if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0)) throw Error("eval iou_threshold must lie in (0,1)");
        if (fp_per_image.empty()) throw Error("at least one FP/image operating point is required");
        for (double p : fp_per_image)
            if (!(p > 0)) throw Error("FP/image operating points must be positive");
    }
};

/// Greedy matching outcome for one image: every prediction with the ground
/// truth it claimed (if any), plus the ground truths nothing claimed.
struct MatchResult {
    std::string image_key;
    std::vector<LesionAnnotation> gts;

    struct PredRecord {
        Prediction pred;
        std::optional<std::size_t> gt; // index into gts
        double iou_value = 0.0;
    };
    std::vector<PredRecord> preds; // descending score order
    std::vector<std::size_t> unmatched_gts;
};

// Predictions are processed in descending score (ties by box coordinates,
// then label, then source). Each claims the still-unmatched ground truth
// with the highest IoU, provided the IoU reaches the threshold and, when
// class_aware is set, the labels agree. Every GT and every prediction is
// used at most once. Because processing is score-ordered, the matching of
// any score prefix equals the matching of that prefix alone, which is what
// makes the single-pass FROC sweep below exact.
inline MatchResult match_image(std::vector<LesionAnnotation> gts, std::vector<Prediction> preds,
                               const EvalConfig& cfg, bool class_aware) {
    cfg.validate();
    std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (!(a.box == b.box)) return box_less(a.box, b.box);
        if (a.label != b.label) return label_code(a.label) < label_code(b.label);
        return a.source_id < b.source_id;
    });

    MatchResult out;
    out.image_key =
        gts.empty() ? (preds.empty() ? std::string{} : preds.front().image_key) : gts.front().image_key();
    out.gts = std::move(gts);

    std::vector<bool> taken(out.gts.size(), false);
    for (auto& p : preds) {
        std::optional<std::size_t> best;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < out.gts.size(); ++g) {
            if (taken[g]) continue;
            if (class_aware && (!out.gts[g].label || *out.gts[g].label != p.label)) continue;
            double v = iou(out.gts[g].box, p.box);
            if (v >= cfg.iou_threshold && v > best_iou) {
                best = g;
                best_iou = v;
            }
        }
        if (best) taken[*best] = true;
        out.preds.push_back({std::move(p), best, best ? best_iou : 0.0});
    }
    for (std::size_t g = 0; g < out.gts.size(); ++g)
        if (!taken[g]) out.unmatched_gts.push_back(g);
    return out;
}

inline MatchResult match_image(std::vector<LesionAnnotation> gts, std::vector<Prediction> preds,
                               const EvalConfig& cfg) {
    return match_image(std::move(gts), std::move(preds), cfg, cfg.class_aware_matching);
}

struct OperatingPointStats {
    double fp_point = 0.0;
    std::optional<double> sensitivity; // absent when the slice holds no GT
    long long tp = 0;
    long long fn = 0;
    bool reachable = true; // false when even the strictest threshold overshoots
};

struct FrocResult {
    std::vector<std::pair<double, double>> curve; // (mean FP/image, sensitivity), thresholds descending
    std::vector<OperatingPointStats> at_points;
    std::vector<std::string> warnings;
};

// FROC over matched images. Sensitivity numerator/denominator can be
// restricted to one class and/or size stratum; false positives are always
// every unmatched prediction on every image, and the FP denominator is the
// full test image count. The sweep visits each distinct prediction score
// from the top; sensitivity at operating point k is read at the lowest
// threshold whose mean FP/image still fits within k.
inline FrocResult froc(const std::vector<MatchResult>& images, const EvalConfig& cfg,
                       std::optional<BodyPartLabel> slice_label = {},
                       std::optional<SizeStratum> slice_stratum = {}) {
    cfg.validate();
    if (images.empty()) throw EmptyEvalError("no test images to evaluate");
    const double num_images = static_cast<double>(images.size());

    auto in_slice = [&](const LesionAnnotation& gt) {
        if (slice_label && (!gt.label || *gt.label != *slice_label)) return false;
        if (slice_stratum && gt.stratum() != *slice_stratum) return false;
        return true;
    };

    long long total_gt = 0;
    struct Det {
        double score;
        bool fp;       // unmatched prediction
        bool slice_tp; // matched, and its GT belongs to the slice
    };
    std::vector<Det> dets;
    for (const auto& img : images) {
        for (const auto& gt : img.gts)
            if (in_slice(gt)) ++total_gt;
        for (const auto& pr : img.preds)
            dets.push_back({pr.pred.score, !pr.gt.has_value(), pr.gt.has_value() && in_slice(img.gts[*pr.gt])});
    }
    std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });

    FrocResult out;
    struct CurvePoint {
        double threshold, fp_rate;
        long long tp;
    };
    std::vector<CurvePoint> pts;
    long long tp = 0, fp = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        tp += dets[i].slice_tp ? 1 : 0;
        fp += dets[i].fp ? 1 : 0;
        if (i + 1 == dets.size() || dets[i + 1].score != dets[i].score)
            pts.push_back({dets[i].score, static_cast<double>(fp) / num_images, tp});
    }
    for (const auto& p : pts)
        out.curve.emplace_back(p.fp_rate, total_gt > 0 ? static_cast<double>(p.tp) / total_gt : 0.0);

    for (double point : cfg.fp_per_image) {
        OperatingPointStats st;
        st.fp_point = point;
        const CurvePoint* chosen = nullptr;
        for (const auto& p : pts) {
            if (p.fp_rate <= point)
                chosen = &p; // fp_rate only grows as the threshold drops
            else
                break;
        }
        if (chosen) {
            st.tp = chosen->tp;
        } else if (!pts.empty()) {
            st.reachable = false;
            out.warnings.push_back("operating point " + format_double(point) +
                                   " FP/image is below the strictest achievable threshold (" +
                                   format_double(pts.front().fp_rate) + " FP/image); sensitivity reported as 0");
        }
        st.fn = total_gt - st.tp;
        if (total_gt > 0)
            st.sensitivity = static_cast<double>(st.tp) / total_gt;
        out.at_points.push_back(st);
    }
    return out;
}

using Confusion = std::array<std::array<long long, 8>, 8>; // rows: GT label, cols: predicted label

struct ConfusionResult {
    Confusion cells{};
    long long total = 0; // equals the localized-pair count at the operating point
    std::optional<double> score_threshold;
    std::vector<std::string> warnings;
};

// Label confusion over localization-only matches: every GT-prediction pair
// that overlaps at the IoU threshold and survives the FP operating point
// increments (gt label, predicted label). Inputs must come from
// class-agnostic matching or cross-label cells can never fill.
inline ConfusionResult confusion_matrix(const std::vector<MatchResult>& loc_matches, const EvalConfig& cfg,
                                        double fp_point) {
    cfg.validate();
    if (loc_matches.empty()) throw EmptyEvalError("no test images to evaluate");
    const double num_images = static_cast<double>(loc_matches.size());

    ConfusionResult out;
    std::optional<double> threshold;
    // Walk distinct scores from the top, tracking the FP count among
    // predictions at or above each; keep the lowest score that stays within
    // the budget.
    std::vector<std::pair<double, long long>> fp_at; // (threshold, cumulative fp)
    {
        std::vector<std::pair<double, bool>> flat;
        for (const auto& img : loc_matches)
            for (const auto& pr : img.preds) flat.emplace_back(pr.pred.score, !pr.gt.has_value());
        std::sort(flat.begin(), flat.end(), [](auto& a, auto& b) { return a.first > b.first; });
        long long run = 0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            run += flat[i].second ? 1 : 0;
            if (i + 1 == flat.size() || flat[i + 1].first != flat[i].first) fp_at.emplace_back(flat[i].first, run);
        }
    }
    for (const auto& [score, cum_fp] : fp_at) {
        if (static_cast<double>(cum_fp) / num_images <= fp_point)
            threshold = score;
        else
            break;
    }
    if (!threshold && !fp_at.empty()) {
        out.warnings.push_back("confusion matrix: no score threshold meets " + format_double(fp_point) +
                               " FP/image; matrix left empty");
        return out;
    }

    for (const auto& img : loc_matches) {
        for (const auto& pr : img.preds) {
            if (!pr.gt) continue;
            if (threshold && pr.pred.score < *threshold) continue;
            const auto& gt = img.gts[*pr.gt];
            if (!gt.label) continue;
            ++out.cells[label_code(*gt.label) - 1][label_code(pr.pred.label) - 1];
            ++out.total;
        }
    }
    out.score_threshold = threshold;
    return out;
}

// ---------------------------------------------------------------------------
// Stratified report

struct FoldInput {
    std::vector<LesionAnnotation> gts;
    std::vector<Prediction> preds;
};

struct SliceStats {
    std::optional<double> sensitivity;
    long long tp = 0;
    long long fn = 0;
    bool reachable = true;
};

// stratum key ("all" / "large" / "small") -> fp-point key -> stats
using StratumTable = std::map<std::string, std::map<std::string, SliceStats>>;

struct FoldReport {
    std::size_t num_images = 0;
    std::size_t num_gt = 0;
    std::map<int, StratumTable> per_class; // label code 1..8
    StratumTable overall;
    std::vector<std::pair<double, double>> froc_curve;
    Confusion confusion{};
    long long confusion_total = 0;
    std::vector<std::string> warnings;
};

struct EvalReport {
    EvalConfig config;
    std::vector<FoldReport> folds;
    FoldReport mean; // sensitivities: unweighted fold mean; tp/fn/confusion: sums; curve: pooled images
};

inline std::string fp_point_key(double p) { return format_double(p); }

namespace detail {

inline std::vector<MatchResult> match_fold(const FoldInput& fold, const EvalConfig& cfg, bool class_aware) {
    std::map<std::string, std::vector<LesionAnnotation>> gts_by_image;
    for (const auto& gt : fold.gts) gts_by_image[gt.image_key()].push_back(gt);
    if (gts_by_image.empty()) throw EmptyEvalError("fold has no test images");

    std::map<std::string, std::vector<Prediction>> preds_by_image;
    for (const auto& p : fold.preds) {
        if (!gts_by_image.count(p.image_key))
            throw Error("prediction references image_key '" + p.image_key +
                        "' that is not in the ground-truth manifest");
        preds_by_image[p.image_key].push_back(p);
    }

    std::vector<std::pair<std::string, std::vector<LesionAnnotation>>> images(gts_by_image.begin(),
                                                                              gts_by_image.end());
    std::vector<MatchResult> matches(images.size());
    parallel_for(images.size(), cfg.threads, [&](std::size_t i) {
        auto it = preds_by_image.find(images[i].first);
        std::vector<Prediction> preds = it == preds_by_image.end() ? std::vector<Prediction>{} : it->second;
        matches[i] = match_image(images[i].second, std::move(preds), cfg, class_aware);
        matches[i].image_key = images[i].first;
    });
    return matches;
}

inline StratumTable build_table(const std::vector<MatchResult>& matches, const EvalConfig& cfg,
                                std::optional<BodyPartLabel> label, std::vector<std::string>& warnings) {
    StratumTable table;
    std::vector<std::pair<std::string, std::optional<SizeStratum>>> strata = {{"all", std::nullopt}};
    if (cfg.size_strata_enabled) {
        strata.emplace_back("large", SizeStratum::Large);
        strata.emplace_back("small", SizeStratum::Small);
    }
    for (const auto& [key, stratum] : strata) {
        FrocResult r = froc(matches, cfg, label, stratum);
        for (const auto& st : r.at_points)
            table[key][fp_point_key(st.fp_point)] = SliceStats{st.sensitivity, st.tp, st.fn, st.reachable};
        for (auto& w : r.warnings)
            if (!label && key == "all") warnings.push_back(std::move(w)); // warn once, not per slice
    }
    return table;
}

} // namespace detail

// Full evaluation: per-fold matching, per (class x stratum x operating
// point) sensitivities, the pooled FROC curve, and the localization-only
// confusion matrix at the first operating point. Ground truths must be
// labeled; curate with keep_labeled first.
inline EvalReport stratified_report(const std::vector<FoldInput>& folds, const EvalConfig& cfg) {
    cfg.validate();
    if (folds.empty()) throw EmptyEvalError("no folds to evaluate");

    EvalReport report;
    report.config = cfg;

    std::vector<MatchResult> pooled_loc; // class-agnostic matches across folds, for mean curve + confusion
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (const auto& gt : folds[f].gts)
            if (!gt.label)
                throw UnlabeledLesionError("evaluation requires labeled ground truth; lesion '" + gt.lesion_id +
                                           "' has none (run ingest --labeled-only)");

        auto matches = detail::match_fold(folds[f], cfg, cfg.class_aware_matching);
        auto loc_matches =
            cfg.class_aware_matching ? detail::match_fold(folds[f], cfg, false) : matches;

        FoldReport fr;
        fr.num_images = matches.size();
        fr.num_gt = folds[f].gts.size();
        fr.overall = detail::build_table(matches, cfg, std::nullopt, fr.warnings);
        for (BodyPartLabel label : kAllLabels)
            fr.per_class[label_code(label)] = detail::build_table(matches, cfg, label, fr.warnings);
        fr.froc_curve = froc(matches, cfg).curve;

        ConfusionResult conf = confusion_matrix(loc_matches, cfg, cfg.fp_per_image.front());
        fr.confusion = conf.cells;
        fr.confusion_total = conf.total;
        for (auto& w : conf.warnings) fr.warnings.push_back(std::move(w));

        for (auto& m : loc_matches) pooled_loc.push_back(std::move(m));
        report.folds.push_back(std::move(fr));
    }

    // Cross-fold aggregate.
    FoldReport& mean = report.mean;
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
        const FoldReport& fr = report.folds[f];
        mean.num_images += fr.num_images;
        mean.num_gt += fr.num_gt;
        mean.confusion_total += fr.confusion_total;
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) mean.confusion[r][c] += fr.confusion[r][c];
        for (const auto& w : fr.warnings)
            mean.warnings.push_back("fold " + std::to_string(f) + ": " + w);
    }
    auto aggregate = [&](auto select) {
        StratumTable out;
        const StratumTable& shape = select(report.folds.front());
        for (const auto& [stratum, by_point] : shape) {
            for (const auto& [point, _] : by_point) {
                SliceStats agg;
                double sum = 0;
                int defined = 0;
                for (const auto& fr : report.folds) {
                    const SliceStats& st = select(fr).at(stratum).at(point);
                    agg.tp += st.tp;
                    agg.fn += st.fn;
                    agg.reachable = agg.reachable && st.reachable;
                    if (st.sensitivity) {
                        sum += *st.sensitivity;
                        ++defined;
                    }
                }
                if (defined > 0) agg.sensitivity = sum / defined;
                out[stratum][point] = agg;
            }
        }
        return out;
    };
    mean.overall = aggregate([](const FoldReport& fr) -> const StratumTable& { return fr.overall; });
    for (BodyPartLabel label : kAllLabels) {
        int code = label_code(label);
        mean.per_class[code] =
            aggregate([code](const FoldReport& fr) -> const StratumTable& { return fr.per_class.at(code); });
    }
    mean.froc_curve = froc(pooled_loc, cfg).curve;
    return report;
}

// ---------------------------------------------------------------------------
// Renderers

namespace detail {

inline nlohmann::ordered_json table_to_json(const StratumTable& t) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [stratum, by_point] : t) {
        nlohmann::ordered_json jp = nlohmann::ordered_json::object();
        for (const auto& [point, st] : by_point) {
            nlohmann::ordered_json js;
            js["sensitivity"] = st.sensitivity ? nlohmann::ordered_json(*st.sensitivity) : nullptr;
            js["tp"] = st.tp;
            js["fn"] = st.fn;
            if (!st.reachable) js["reachable"] = false;
            jp[point] = std::move(js);
        }
        j[stratum] = std::move(jp);
    }
    return j;
}

inline nlohmann::ordered_json fold_body_json(const FoldReport& fr) {
    nlohmann::ordered_json j;
    j["num_images"] = fr.num_images;
    j["num_gt"] = fr.num_gt;
    nlohmann::ordered_json pc = nlohmann::ordered_json::object();
    for (const auto& [code, table] : fr.per_class)
        pc[std::string(label_key(*label_from_code(code)))] = table_to_json(table);
    j["per_class"] = std::move(pc);
    j["overall"] = table_to_json(fr.overall);
    nlohmann::ordered_json curve = nlohmann::ordered_json::array();
    for (const auto& [fp_rate, sens] : fr.froc_curve) curve.push_back({fp_rate, sens});
    j["froc_curve"] = std::move(curve);
    j["confusion"] = fr.confusion;
    j["confusion_total"] = fr.confusion_total;
    j["warnings"] = fr.warnings;
    return j;
}

} // namespace detail

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json cfg;
    cfg["iou_threshold"] = r.config.iou_threshold;
    cfg["fp_per_image"] = r.config.fp_per_image;
    cfg["class_aware_matching"] = r.config.class_aware_matching;
    cfg["size_strata_enabled"] = r.config.size_strata_enabled;
    cfg["num_folds"] = r.folds.size();
    cfg["notes"] = {
        "any unmatched prediction counts as a false positive regardless of class or size stratum",
        "FP/image denominator is the number of test key-slice images",
        "confusion matrix uses localization-only matching at the first FP operating point",
        "cross-fold sensitivity is the unweighted mean of per-fold values; tp/fn/confusion are summed",
    };
    j["config"] = std::move(cfg);

    nlohmann::ordered_json body = detail::fold_body_json(r.mean);
    j["per_class"] = body["per_class"];
    j["froc_curve"] = body["froc_curve"];
    j["confusion"] = body["confusion"];
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& fr : r.folds) folds.push_back(detail::fold_body_json(fr));
    j["folds"] = std::move(folds);
    j["overall"] = body["overall"];
    j["confusion_total"] = body["confusion_total"];
    j["num_images"] = body["num_images"];
    j["num_gt"] = body["num_gt"];
    j["warnings"] = r.mean.warnings;
    return j;
}

// Plain-text tables, classes as columns in under-represented-first order.
inline std::string render_report_text(const EvalReport& r) {
    static constexpr std::array<BodyPartLabel, 8> column_order = {
        BodyPartLabel::Bone,    BodyPartLabel::Kidney,      BodyPartLabel::SoftTissue, BodyPartLabel::Pelvis,
        BodyPartLabel::Abdomen, BodyPartLabel::Mediastinum, BodyPartLabel::Lung,       BodyPartLabel::Liver,
    };
    std::string out;
    out += "Sensitivity (%) at IoU " + format_double(r.config.iou_threshold) + ", " +
           (r.config.class_aware_matching ? "class-aware" : "localization-only") + " matching, " +
           std::to_string(r.folds.size()) + " fold(s), " + std::to_string(r.mean.num_images) + " image(s), " +
           std::to_string(r.mean.num_gt) + " lesion(s)\n";

    std::vector<std::pair<std::string, std::string>> strata = {{"all", "All sizes"}};
    if (r.config.size_strata_enabled)
        strata = {{"large", "SAD >= 10 mm"}, {"small", "SAD < 10 mm"}, {"all", "All sizes"}};

    for (const auto& [stratum, title] : strata) {
        out += "\n" + title + "\n";
        std::string header = "FP/img";
        for (BodyPartLabel l : column_order) header += " | " + std::string(label_name(l));
        header += " | Overall";
        out += header + "\n";
        out += std::string(header.size(), '-') + "\n";
        for (double point : r.config.fp_per_image) {
            const std::string key = fp_point_key(point);
            std::string row = format_double(point);
            while (row.size() < 6) row.insert(row.begin(), ' ');
            auto cell = [](const SliceStats& st, std::size_t width) {
                std::string v = st.sensitivity ? format_1dp(*st.sensitivity * 100.0) : std::string("-");
                while (v.size() < width) v.insert(v.begin(), ' ');
                return " | " + v;
            };
            for (BodyPartLabel l : column_order)
                row += cell(r.mean.per_class.at(label_code(l)).at(stratum).at(key), label_name(l).size());
            row += cell(r.mean.overall.at(stratum).at(key), 7);
            out += row + "\n";
        }
    }

    out += "\nConfusion (rows: GT label, cols: predicted label, localized pairs at " +
           format_double(r.config.fp_per_image.front()) + " FP/image): total " +
           std::to_string(r.mean.confusion_total) + "\n";
    out += "          ";
    for (BodyPartLabel l : kAllLabels) {
        std::string n = std::to_string(label_code(l));
        out += "      " + n;
    }
    out += "\n";
    for (BodyPartLabel row : kAllLabels) {
        std::string name(label_name(row));
        name.resize(10, ' ');
        out += name;
        for (BodyPartLabel col : kAllLabels) {
            std::string v = std::to_string(r.mean.confusion[label_code(row) - 1][label_code(col) - 1]);
            while (v.size() < 7) v.insert(v.begin(), ' ');
            out += v;
        }
        out += "\n";
    }
    if (!r.mean.warnings.empty()) {
        out += "\nWarnings:\n";
        for (const auto& w : r.mean.warnings) out += "  " + w + "\n";
    }
    return out;
}

} // namespace lesionkit
