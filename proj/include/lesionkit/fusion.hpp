#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesionkit/core.hpp"
#include "lesionkit/errors.hpp"
#include "lesionkit/util.hpp"

namespace lesionkit {

/// One detector output box.
struct Prediction {
    std::string image_key; // patient/study/series/slice composite
    BoundingBox box;
    BodyPartLabel label = BodyPartLabel::Bone;
    double score = 0.0; // in [0,1]
    std::string source_id; // model+epoch+fold of origin

    bool operator==(const Prediction&) const = default;
};

enum class ScoreMode { Average, RescaledAverage };

/// Weighted boxes fusion parameters. num_sources is the number of fused
/// prediction sets (N); under RescaledAverage a cluster of T members keeps
/// score mean * min(T, N) / N, damping boxes few sources agreed on.
struct FusionConfig {
    double iou_threshold = 0.55;
    int num_sources = 5;
    ScoreMode score_mode = ScoreMode::RescaledAverage;

    void validate() const {
        if (!(iou_threshold > 0.0) || !(iou_threshold < 1.0))
            throw Error("fusion iou_threshold must lie in (0,1)");
        if (num_sources < 1) throw Error("fusion num_sources must be >= 1");
    }
};

namespace detail {

// Processing order: score descending, ties by source_id then box
// coordinates. Fixing this makes wbf insensitive to input permutation.
inline bool wbf_order(const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.source_id != b.source_id) return a.source_id < b.source_id;
    return box_less(a.box, b.box);
}

struct Cluster {
    double sum_w = 0, sum_wx1 = 0, sum_wy1 = 0, sum_wx2 = 0, sum_wy2 = 0;
    double sum_scores = 0;
    int count = 0;

    void add(const Prediction& p) {
        sum_w += p.score;
        sum_wx1 += p.score * p.box.x1;
        sum_wy1 += p.score * p.box.y1;
        sum_wx2 += p.score * p.box.x2;
        sum_wy2 += p.score * p.box.y2;
        sum_scores += p.score;
        ++count;
    }

    BoundingBox fused_box() const {
        return BoundingBox(sum_wx1 / sum_w, sum_wy1 / sum_w, sum_wx2 / sum_w, sum_wy2 / sum_w);
    }
};

} // namespace detail

// Weighted boxes fusion for the predictions of a single image. Labels are
// fused independently. Each box, in processing order, joins the first
// cluster whose *current* fused box overlaps it with IoU strictly above the
// threshold, else opens a new cluster. A cluster's box is the score-weighted
// average of its members; its score is their arithmetic mean, optionally
// rescaled by min(T, N)/N.
inline std::vector<Prediction> wbf(std::vector<Prediction> preds, const FusionConfig& cfg = {}) {
    cfg.validate();
    if (preds.empty()) return {};
    for (const auto& p : preds)
        if (p.image_key != preds.front().image_key)
            throw KeyMismatchError("wbf input mixes image keys '" + preds.front().image_key + "' and '" +
                                   p.image_key + "'");

    std::sort(preds.begin(), preds.end(), detail::wbf_order);

    std::vector<Prediction> out;
    for (BodyPartLabel label : kAllLabels) {
        std::vector<detail::Cluster> clusters;
        for (const auto& p : preds) {
            if (p.label != label) continue;
            detail::Cluster* home = nullptr;
            for (auto& c : clusters) {
                if (iou(c.fused_box(), p.box) > cfg.iou_threshold) {
                    home = &c;
                    break;
                }
            }
            if (!home) home = &clusters.emplace_back();
            home->add(p);
        }
        for (const auto& c : clusters) {
            double score = c.sum_scores / c.count;
            if (cfg.score_mode == ScoreMode::RescaledAverage)
                score *= static_cast<double>(std::min(c.count, cfg.num_sources)) / cfg.num_sources;
            out.push_back(Prediction{preds.front().image_key, c.fused_box(), label, score, "wbf"});
        }
    }

    std::sort(out.begin(), out.end(), [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.label != b.label) return label_code(a.label) < label_code(b.label);
        return box_less(a.box, b.box);
    });
    return out;
}

/// Keeps predictions with score >= min_score (boundary inclusive), order
/// preserved.
inline std::vector<Prediction> filter_by_score(const std::vector<Prediction>& preds, double min_score) {
    if (min_score < 0.0 || min_score > 1.0) throw Error("min_score must lie in [0,1]");
    std::vector<Prediction> out;
    for (const auto& p : preds)
        if (p.score >= min_score) out.push_back(p);
    return out;
}

/// Groups by image key and fuses each image independently; output ordered by
/// image key, then per-image fusion order.
inline std::vector<Prediction> fuse_all(const std::vector<Prediction>& preds, const FusionConfig& cfg = {},
                                        int threads = 1) {
    std::map<std::string, std::vector<Prediction>> by_image;
    for (const auto& p : preds) by_image[p.image_key].push_back(p);

    std::vector<std::vector<Prediction>> groups;
    groups.reserve(by_image.size());
    for (auto& [key, group] : by_image) groups.push_back(std::move(group));

    std::vector<std::vector<Prediction>> fused(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t i) { fused[i] = wbf(std::move(groups[i]), cfg); });

    std::vector<Prediction> out;
    for (auto& f : fused)
        for (auto& p : f) out.push_back(std::move(p));
    return out;
}

// ---------------------------------------------------------------------------
// Predictions file: JSON Lines, one object per prediction, e.g.
//   {"image_key":"P1/S1/1/42","box":[10,20,30,40],"label":5,"score":0.9,"source_id":"vfnet-e21-f0"}

inline std::vector<Prediction> read_predictions_jsonl(std::istream& in) {
    std::vector<Prediction> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError(lineno, "", "invalid JSON");
        try {
            if (!j.is_object()) throw Error("expected a JSON object");
            auto box = j.at("box");
            if (!box.is_array() || box.size() != 4) throw Error("box must be [x1,y1,x2,y2]");
            auto label = label_from_code(j.at("label").get<long long>());
            if (!label) throw Error("label must be an integer in 1..8");
            double score = j.at("score").get<double>();
            if (!(score >= 0.0 && score <= 1.0)) throw Error("score must lie in [0,1]");
            out.push_back(Prediction{
                j.at("image_key").get<std::string>(),
                BoundingBox(box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()),
                *label,
                score,
                j.value("source_id", std::string{}),
            });
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, "", e.what());
        } catch (const Error& e) {
            throw ParseError(lineno, "", e.what());
        }
    }
    return out;
}

inline void write_predictions_jsonl(const std::vector<Prediction>& preds, std::ostream& out) {
    for (const auto& p : preds) {
        nlohmann::ordered_json j;
        j["image_key"] = p.image_key;
        j["box"] = {p.box.x1, p.box.y1, p.box.x2, p.box.y2};
        j["label"] = label_code(p.label);
        j["score"] = p.score;
        j["source_id"] = p.source_id;
        out << j.dump() << "\n";
    }
}

} // namespace lesionkit
