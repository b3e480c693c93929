#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "lesionkit/core.hpp"
#include "lesionkit/errors.hpp"
#include "lesionkit/rng.hpp"
#include "lesionkit/util.hpp"

namespace lesionkit {

enum class Split { Train, Val, Test };

inline std::string_view split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

/// One ground-truth lesion record: provenance keys, geometry, and the
/// display window that was attached to its slice.
struct LesionAnnotation {
    std::string lesion_id;
    std::string patient_id;
    std::string study_id;
    int visit_index = 1; // 1-based ordinal of the study within the patient
    std::string series_id;
    int slice_index = 0;
    int image_width = 0;
    int image_height = 0;
    double spacing_mm_per_px = 1.0;
    RecistMeasurement recist;
    BoundingBox box;
    std::optional<BodyPartLabel> label;
    double window_center = 0.0;
    double window_width = 0.0;

    std::string image_key() const {
        return patient_id + "/" + study_id + "/" + series_id + "/" + std::to_string(slice_index);
    }

    double sad() const { return sad_mm(recist, spacing_mm_per_px); }
    SizeStratum stratum() const { return stratum_for_sad(sad()); }

    bool operator==(const LesionAnnotation&) const = default;
};

/// A collection of annotations plus optional patient-level split assignment
/// and free-text provenance lines ("# provenance: ..." comments on disk).
struct DatasetManifest {
    std::vector<LesionAnnotation> annotations;
    std::optional<std::map<std::string, Split>> split_assignment;
    std::vector<std::string> provenance;

    std::size_t size() const { return annotations.size(); }
    bool empty() const { return annotations.empty(); }

    std::vector<std::string> patient_ids() const { // distinct, sorted
        std::set<std::string> s;
        for (const auto& a : annotations) s.insert(a.patient_id);
        return {s.begin(), s.end()};
    }
};

inline constexpr std::array<std::string_view, 15> kManifestColumns = {
    "lesion_id",   "patient_id",   "study_id",          "visit_index", "series_id",
    "slice_index", "image_width",  "image_height",      "spacing_mm_per_px",
    "long_axis",   "short_axis",   "bbox",              "label",
    "window_center", "window_width",
};

namespace detail {

inline Point parse_point_pair(std::size_t line, const std::string& column, std::size_t offset,
                              const std::vector<std::string_view>& parts) {
    auto px = parse_double(parts[offset]);
    auto py = parse_double(parts[offset + 1]);
    if (!px || !py) throw ParseError(line, column, "expected decimal coordinates");
    return Point{*px, *py};
}

inline std::pair<Point, Point> parse_axis(std::string_view field, std::size_t line, const std::string& column) {
    auto parts = split(trim(field), ' ');
    std::erase_if(parts, [](std::string_view p) { return p.empty(); });
    if (parts.size() != 4)
        throw ParseError(line, column, "expected 'x1 y1 x2 y2', got '" + std::string(field) + "'");
    return {parse_point_pair(line, column, 0, parts), parse_point_pair(line, column, 2, parts)};
}

inline std::string format_axis(Point a, Point b) {
    return format_double(a.x) + " " + format_double(a.y) + " " + format_double(b.x) + " " + format_double(b.y);
}

} // namespace detail

// Parses the manifest CSV. Comment lines starting with '#' may precede the
// header; "# provenance:" comments are retained. Rows whose label code falls
// outside 1..8 (including the -1 sentinel) get an absent label. An empty
// bbox cell is filled from the measurement hull with zero padding.
// Data-quality findings that are not hard errors (short axis longer than
// long axis) are appended to *warnings when provided.
inline DatasetManifest parse_manifest(std::istream& in, std::vector<std::string>* warnings = nullptr) {
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    std::set<std::string> seen_ids;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            constexpr std::string_view tag = "# provenance: ";
            if (std::string_view(line).substr(0, tag.size()) == tag)
                m.provenance.emplace_back(line.substr(tag.size()));
            continue;
        }
        auto fields = split(line, ',');
        if (!header_seen) {
            if (fields.size() != kManifestColumns.size())
                throw ParseError(lineno, "", "header must have " + std::to_string(kManifestColumns.size()) +
                                                 " columns, got " + std::to_string(fields.size()));
            for (std::size_t i = 0; i < fields.size(); ++i)
                if (trim(fields[i]) != kManifestColumns[i])
                    throw ParseError(lineno, std::string(kManifestColumns[i]),
                                     "unexpected header field '" + std::string(fields[i]) + "'");
            header_seen = true;
            continue;
        }
        if (fields.size() != kManifestColumns.size())
            throw ParseError(lineno, "", "expected " + std::to_string(kManifestColumns.size()) + " fields, got " +
                                             std::to_string(fields.size()));

        auto col = [&](std::size_t i) { return std::string(kManifestColumns[i]); };
        auto need_int = [&](std::size_t i) {
            auto v = parse_int(trim(fields[i]));
            if (!v) throw ParseError(lineno, col(i), "expected integer, got '" + std::string(fields[i]) + "'");
            return *v;
        };
        auto need_double = [&](std::size_t i) {
            auto v = parse_double(trim(fields[i]));
            if (!v) throw ParseError(lineno, col(i), "expected decimal, got '" + std::string(fields[i]) + "'");
            return *v;
        };

        std::string lesion_id(trim(fields[0]));
        if (lesion_id.empty()) throw ParseError(lineno, col(0), "lesion_id must be nonempty");
        if (!seen_ids.insert(lesion_id).second)
            throw DuplicateIdError("duplicate lesion_id '" + lesion_id + "' at line " + std::to_string(lineno));

        long long visit = need_int(3);
        if (visit < 1) throw ParseError(lineno, col(3), "visit_index must be >= 1");
        long long iw = need_int(6), ih = need_int(7);
        if (iw <= 0 || ih <= 0) throw ParseError(lineno, col(6), "image dimensions must be positive");
        double spacing = need_double(8);
        if (!(spacing > 0)) throw ParseError(lineno, col(8), "spacing must be positive");

        auto [la, lb] = detail::parse_axis(fields[9], lineno, col(9));
        auto [sa, sb] = detail::parse_axis(fields[10], lineno, col(10));

        std::optional<RecistMeasurement> recist;
        try {
            recist.emplace(la, lb, sa, sb);
        } catch (const InvalidMeasurementError& e) {
            throw ParseError(lineno, col(9), e.what());
        }
        if (warnings && !recist->axes_consistent())
            warnings->push_back("line " + std::to_string(lineno) + ": lesion '" + lesion_id +
                                "' short axis longer than long axis");

        std::optional<BoundingBox> box;
        std::string_view bbox_field = trim(fields[11]);
        try {
            if (bbox_field.empty()) {
                box = box_from_recist(*recist, 0.0);
            } else {
                auto [p1, p2] = detail::parse_axis(bbox_field, lineno, col(11));
                box.emplace(p1.x, p1.y, p2.x, p2.y);
            }
        } catch (const InvalidBoxError& e) {
            throw ParseError(lineno, col(11), e.what());
        }
        if (box->x1 < 0 || box->y1 < 0 || box->x2 > static_cast<double>(iw) || box->y2 > static_cast<double>(ih))
            throw ParseError(lineno, col(11), "box extends outside the image bounds");

        long long label_code_raw = need_int(12);
        std::optional<BodyPartLabel> label = label_from_code(label_code_raw);

        LesionAnnotation ann{
            .lesion_id = std::move(lesion_id),
            .patient_id = std::string(trim(fields[1])),
            .study_id = std::string(trim(fields[2])),
            .visit_index = static_cast<int>(visit),
            .series_id = std::string(trim(fields[4])),
            .slice_index = static_cast<int>(need_int(5)),
            .image_width = static_cast<int>(iw),
            .image_height = static_cast<int>(ih),
            .spacing_mm_per_px = spacing,
            .recist = *recist,
            .box = *box,
            .label = label,
            .window_center = need_double(13),
            .window_width = need_double(14),
        };
        if (ann.patient_id.empty()) throw ParseError(lineno, col(1), "patient_id must be nonempty");
        m.annotations.push_back(std::move(ann));
    }
    if (!header_seen && lineno > 0) throw ParseError(lineno, "", "no header row found");
    if (lineno == 0) throw ParseError(0, "", "empty input: missing header row");
    return m;
}

// Emits provenance comments, the header, then one row per annotation.
// Doubles use shortest round-trip formatting, so write(parse(x)) == x.
// Split assignments are not part of the CSV schema; they are materialized by
// writing one file per split (see manifest_for_split).
inline void write_manifest(const DatasetManifest& m, std::ostream& out) {
    for (const auto& p : m.provenance) out << "# provenance: " << p << "\n";
    for (std::size_t i = 0; i < kManifestColumns.size(); ++i)
        out << kManifestColumns[i] << (i + 1 < kManifestColumns.size() ? "," : "");
    out << "\n";
    for (const auto& a : m.annotations) {
        out << a.lesion_id << ',' << a.patient_id << ',' << a.study_id << ',' << a.visit_index << ','
            << a.series_id << ',' << a.slice_index << ',' << a.image_width << ',' << a.image_height << ','
            << format_double(a.spacing_mm_per_px) << ','
            << detail::format_axis(a.recist.long_a, a.recist.long_b) << ','
            << detail::format_axis(a.recist.short_a, a.recist.short_b) << ','
            << format_double(a.box.x1) << ' ' << format_double(a.box.y1) << ' '
            << format_double(a.box.x2) << ' ' << format_double(a.box.y2) << ','
            << (a.label ? label_code(*a.label) : -1) << ','
            << format_double(a.window_center) << ',' << format_double(a.window_width) << "\n";
    }
}

/// Keeps, per patient, only the annotations at that patient's minimum
/// visit_index. Row order is preserved.
inline DatasetManifest keep_first_visit(const DatasetManifest& m) {
    std::map<std::string, int> first_visit;
    for (const auto& a : m.annotations) {
        auto [it, inserted] = first_visit.try_emplace(a.patient_id, a.visit_index);
        if (!inserted && a.visit_index < it->second) it->second = a.visit_index;
    }
    DatasetManifest out;
    out.provenance = m.provenance;
    out.split_assignment = m.split_assignment;
    for (const auto& a : m.annotations)
        if (a.visit_index == first_visit.at(a.patient_id)) out.annotations.push_back(a);
    return out;
}

/// Drops annotations without a body part label. Row order is preserved.
inline DatasetManifest keep_labeled(const DatasetManifest& m) {
    DatasetManifest out;
    out.provenance = m.provenance;
    out.split_assignment = m.split_assignment;
    for (const auto& a : m.annotations)
        if (a.label) out.annotations.push_back(a);
    return out;
}

// Patient-disjoint split. Distinct patient ids are sorted, shuffled by the
// seed, then allotted per-split counts by largest remainder (remainder ties
// go to the earlier split in train < val < test order). Every lesion follows
// its patient, so no patient straddles two splits.
inline DatasetManifest split_by_patient(const DatasetManifest& m, std::array<double, 3> fractions,
                                        std::uint64_t seed) {
    double sum = fractions[0] + fractions[1] + fractions[2];
    for (double f : fractions)
        if (!(f > 0.0) || !(f < 1.0)) throw Error("split fractions must each lie in (0,1)");
    if (std::abs(sum - 1.0) > 1e-9) throw Error("split fractions must sum to 1");

    std::vector<std::string> patients = m.patient_ids();
    if (patients.size() < 3)
        throw InsufficientPatientsError("need at least 3 patients to split, got " + std::to_string(patients.size()));

    Rng rng(seed);
    rng.shuffle(patients);

    const std::size_t n = patients.size();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double ideal = fractions[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(ideal);
        remainder[i] = ideal - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        return a < b;
    });
    for (std::size_t leftover = n - assigned, i = 0; i < leftover; ++i) ++counts[order[i % 3]];

    std::map<std::string, Split> assignment;
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
        for (std::size_t i = 0; i < counts[s]; ++i) assignment.emplace(patients[pos++], static_cast<Split>(s));

    DatasetManifest out;
    out.annotations = m.annotations;
    out.provenance = m.provenance;
    out.provenance.push_back("split fractions=" + format_double(fractions[0]) + "/" + format_double(fractions[1]) +
                             "/" + format_double(fractions[2]) + " seed=" + std::to_string(seed) +
                             " patients=" + std::to_string(counts[0]) + "/" + std::to_string(counts[1]) + "/" +
                             std::to_string(counts[2]));
    out.split_assignment = std::move(assignment);
    return out;
}

/// Extracts the sub-manifest of one split.
inline DatasetManifest manifest_for_split(const DatasetManifest& m, Split which) {
    if (!m.split_assignment) throw Error("manifest has no split assignment");
    DatasetManifest out;
    out.provenance = m.provenance;
    out.provenance.push_back(std::string("subset split=") + std::string(split_name(which)));
    for (const auto& a : m.annotations) {
        auto it = m.split_assignment->find(a.patient_id);
        if (it == m.split_assignment->end())
            throw Error("patient '" + a.patient_id + "' missing from split assignment");
        if (it->second == which) out.annotations.push_back(a);
    }
    return out;
}

} // namespace lesionkit
