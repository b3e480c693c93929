#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lesionkit/fusion.hpp"
#include "lesionkit/manifest.hpp"

namespace lesionkit {

/// One ranked detection in the "Lesions" block of a findings section.
struct LesionsEntry {
    int rank = 0;
    BodyPartLabel label = BodyPartLabel::Bone;
    double confidence = 0.0; // raw fused score in [0,1]; rendered as a percent
    std::string series_id;
    int slice_index = 0;
    BoundingBox box;

    int confidence_percent() const { return static_cast<int>(percent_of(confidence)); }
    bool operator==(const LesionsEntry&) const = default;
};

struct LesionsSection {
    std::string study_id;
    std::vector<LesionsEntry> entries; // confidence descending, ranks 1..n
    std::vector<std::string> provenance;
    double min_confidence = 0.5;
    int top_k = 3;

    bool operator==(const LesionsSection&) const = default;
};

struct SliceRef {
    std::string series_id;
    int slice_index = 0;
    bool operator==(const SliceRef&) const = default;
};

/// image_key -> (series, slice), for resolving predictions back to the scan.
using AnnotationsIndex = std::map<std::string, SliceRef>;

inline AnnotationsIndex build_index(const DatasetManifest& m) {
    AnnotationsIndex index;
    for (const auto& a : m.annotations) index[a.image_key()] = SliceRef{a.series_id, a.slice_index};
    return index;
}

// Keep predictions at or above the confidence floor, order them best first
// (ties by label code, then box coordinates), cap at top_k, and number the
// survivors 1..n. All input predictions must resolve through the index and
// belong to a single study.
inline LesionsSection build_lesions_section(std::vector<Prediction> preds, const AnnotationsIndex& index,
                                            double min_confidence = 0.5, int top_k = 3,
                                            std::vector<std::string> provenance = {}) {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw Error("min_confidence must lie in [0,1]");
    if (top_k < 1) throw Error("top_k must be at least 1");

    LesionsSection section;
    section.min_confidence = min_confidence;
    section.top_k = top_k;
    section.provenance = std::move(provenance);

    for (const auto& p : preds) {
        if (!index.count(p.image_key))
            throw MissingIndexError("prediction image_key '" + p.image_key + "' is not in the annotations index");
        auto parts = split(p.image_key, '/');
        std::string study = parts.size() >= 2 ? std::string(parts[1]) : std::string();
        if (section.study_id.empty())
            section.study_id = study;
        else if (section.study_id != study)
            throw KeyMismatchError("predictions span studies '" + section.study_id + "' and '" + study +
                                   "'; a Lesions section covers one study");
    }

    std::erase_if(preds, [&](const Prediction& p) { return p.score < min_confidence; });
    std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.label != b.label) return label_code(a.label) < label_code(b.label);
        return box_less(a.box, b.box);
    });
    if (preds.size() > static_cast<std::size_t>(top_k)) preds.erase(preds.begin() + top_k, preds.end());

    for (std::size_t i = 0; i < preds.size(); ++i) {
        const SliceRef& ref = index.at(preds[i].image_key);
        section.entries.push_back(LesionsEntry{static_cast<int>(i) + 1, preds[i].label, preds[i].score,
                                               ref.series_id, ref.slice_index, preds[i].box});
    }
    return section;
}

// Fixed byte format (UTF-8, LF): a "LESIONS:" header, then one line per
// entry, or a single no-findings line. Confidence is an integer percent
// rounded half away from zero; coordinates carry one decimal place.
inline std::string render_text(const LesionsSection& section) {
    std::string out = "LESIONS:\n";
    if (section.entries.empty()) {
        out += "  No lesions detected with confidence >= " + std::to_string(percent_of(section.min_confidence)) +
               "%.\n";
        return out;
    }
    for (const auto& e : section.entries) {
        out += "  " + std::to_string(e.rank) + ". " + std::string(label_name(e.label)) + " lesion, confidence " +
               std::to_string(e.confidence_percent()) + "%, series " + e.series_id + ", slice " +
               std::to_string(e.slice_index) + ", location [" + format_1dp(e.box.x1) + ", " + format_1dp(e.box.y1) +
               ", " + format_1dp(e.box.x2) + ", " + format_1dp(e.box.y2) + "]\n";
    }
    return out;
}

inline nlohmann::ordered_json section_to_json(const LesionsSection& section) {
    nlohmann::ordered_json j;
    j["study_id"] = section.study_id;
    j["min_confidence"] = section.min_confidence;
    j["top_k"] = section.top_k;
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& e : section.entries) {
        nlohmann::ordered_json je;
        je["rank"] = e.rank;
        je["body_part"] = std::string(label_name(e.label));
        je["confidence"] = e.confidence;
        je["confidence_percent"] = e.confidence_percent();
        je["series_id"] = e.series_id;
        je["slice_index"] = e.slice_index;
        je["box"] = {e.box.x1, e.box.y1, e.box.x2, e.box.y2};
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    j["provenance"] = section.provenance;
    return j;
}

inline LesionsSection section_from_json(const nlohmann::ordered_json& j) {
    LesionsSection section;
    try {
        section.study_id = j.at("study_id").get<std::string>();
        section.min_confidence = j.at("min_confidence").get<double>();
        section.top_k = j.at("top_k").get<int>();
        for (const auto& je : j.at("entries")) {
            std::string name = je.at("body_part").get<std::string>();
            std::optional<BodyPartLabel> label;
            for (BodyPartLabel l : kAllLabels)
                if (label_name(l) == name) label = l;
            if (!label) throw ParseError("unknown body part '" + name + "'");
            auto box = je.at("box");
            if (!box.is_array() || box.size() != 4) throw ParseError("entry box must have four coordinates");
            section.entries.push_back(LesionsEntry{
                je.at("rank").get<int>(), *label, je.at("confidence").get<double>(),
                je.at("series_id").get<std::string>(), je.at("slice_index").get<int>(),
                BoundingBox(box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
                            box[3].get<double>())});
        }
        for (const auto& p : j.value("provenance", nlohmann::ordered_json::array()))
            section.provenance.push_back(p.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed Lesions section JSON: ") + e.what());
    }
    return section;
}

} // namespace lesionkit
