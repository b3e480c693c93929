#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "lesionkit/errors.hpp"

namespace lesionkit {

/// Axis-aligned box in continuous image coordinates. Zero-area and
/// non-finite boxes are rejected at construction, so a BoundingBox value is
/// always usable.
struct BoundingBox {
    double x1, y1, x2, y2;

    BoundingBox(double x1_, double y1_, double x2_, double y2_)
        : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
        if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2))
            throw InvalidBoxError("box coordinates must be finite");
        if (!(x1 < x2) || !(y1 < y2))
            throw InvalidBoxError("box requires x1 < x2 and y1 < y2, got [" +
                                  std::to_string(x1) + "," + std::to_string(y1) + "," +
                                  std::to_string(x2) + "," + std::to_string(y2) + "]");
    }

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }

    bool operator==(const BoundingBox&) const = default;
};

// Lexicographic (x1, y1, x2, y2); the tie-break order used by fusion and
// matching when scores are equal.
inline bool box_less(const BoundingBox& a, const BoundingBox& b) {
    if (a.x1 != b.x1) return a.x1 < b.x1;
    if (a.y1 != b.y1) return a.y1 < b.y1;
    if (a.x2 != b.x2) return a.x2 < b.x2;
    return a.y2 < b.y2;
}

/// Intersection-over-union. Area based: boxes that only share an edge have
/// zero intersection area and IoU 0.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0 || ih <= 0) return 0.0;
    double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

struct Point {
    double x, y;
    bool operator==(const Point&) const = default;
};

/// One caliper measurement: a long axis and a (nominally shorter,
/// perpendicular) short axis, each a pair of sub-pixel endpoints.
/// A short axis longer than the long axis is a data-quality smell, not an
/// error; callers can check axes_consistent().
struct RecistMeasurement {
    Point long_a, long_b;
    Point short_a, short_b;

    RecistMeasurement(Point la, Point lb, Point sa, Point sb)
        : long_a(la), long_b(lb), short_a(sa), short_b(sb) {
        for (const Point& p : {la, lb, sa, sb})
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw InvalidMeasurementError("measurement endpoints must be finite");
        if (la == lb) throw InvalidMeasurementError("long axis endpoints coincide");
        if (sa == sb) throw InvalidMeasurementError("short axis endpoints coincide");
    }

    double long_axis_px() const { return std::hypot(long_b.x - long_a.x, long_b.y - long_a.y); }
    double short_axis_px() const { return std::hypot(short_b.x - short_a.x, short_b.y - short_a.y); }

    bool axes_consistent() const { return short_axis_px() <= long_axis_px(); }

    bool operator==(const RecistMeasurement&) const = default;
};

/// The eight lesion location tags with their fixed numeric codes.
enum class BodyPartLabel {
    Bone = 1,
    Abdomen = 2,
    Mediastinum = 3,
    Liver = 4,
    Lung = 5,
    Kidney = 6,
    SoftTissue = 7,
    Pelvis = 8,
};

inline constexpr std::array<BodyPartLabel, 8> kAllLabels = {
    BodyPartLabel::Bone,        BodyPartLabel::Abdomen, BodyPartLabel::Mediastinum,
    BodyPartLabel::Liver,       BodyPartLabel::Lung,    BodyPartLabel::Kidney,
    BodyPartLabel::SoftTissue,  BodyPartLabel::Pelvis,
};

inline int label_code(BodyPartLabel l) { return static_cast<int>(l); }

inline std::optional<BodyPartLabel> label_from_code(long long code) {
    if (code < 1 || code > 8) return std::nullopt;
    return static_cast<BodyPartLabel>(code);
}

/// Display name, e.g. "Soft Tissue".
inline std::string_view label_name(BodyPartLabel l) {
    switch (l) {
        case BodyPartLabel::Bone: return "Bone";
        case BodyPartLabel::Abdomen: return "Abdomen";
        case BodyPartLabel::Mediastinum: return "Mediastinum";
        case BodyPartLabel::Liver: return "Liver";
        case BodyPartLabel::Lung: return "Lung";
        case BodyPartLabel::Kidney: return "Kidney";
        case BodyPartLabel::SoftTissue: return "Soft Tissue";
        case BodyPartLabel::Pelvis: return "Pelvis";
    }
    return "?";
}

/// Machine key, e.g. "soft_tissue"; used in JSON reports.
inline std::string_view label_key(BodyPartLabel l) {
    switch (l) {
        case BodyPartLabel::Bone: return "bone";
        case BodyPartLabel::Abdomen: return "abdomen";
        case BodyPartLabel::Mediastinum: return "mediastinum";
        case BodyPartLabel::Liver: return "liver";
        case BodyPartLabel::Lung: return "lung";
        case BodyPartLabel::Kidney: return "kidney";
        case BodyPartLabel::SoftTissue: return "soft_tissue";
        case BodyPartLabel::Pelvis: return "pelvis";
    }
    return "?";
}

/// Clinical size grouping on short axis diameter. Exactly 10.0 mm is Large.
enum class SizeStratum { Large, Small };

inline SizeStratum stratum_for_sad(double sad_mm) {
    return sad_mm >= 10.0 ? SizeStratum::Large : SizeStratum::Small;
}

inline std::string_view stratum_key(SizeStratum s) {
    return s == SizeStratum::Large ? "large" : "small";
}

/// Axis-aligned hull of the four measurement endpoints, expanded by
/// padding_px on every side. With zero padding a hull that is flat along
/// either axis cannot form a valid box.
inline BoundingBox box_from_recist(const RecistMeasurement& m, double padding_px = 0.0) {
    if (padding_px < 0) throw InvalidBoxError("padding must be nonnegative");
    double x1 = std::min({m.long_a.x, m.long_b.x, m.short_a.x, m.short_b.x}) - padding_px;
    double y1 = std::min({m.long_a.y, m.long_b.y, m.short_a.y, m.short_b.y}) - padding_px;
    double x2 = std::max({m.long_a.x, m.long_b.x, m.short_a.x, m.short_b.x}) + padding_px;
    double y2 = std::max({m.long_a.y, m.long_b.y, m.short_a.y, m.short_b.y}) + padding_px;
    if (!(x1 < x2) || !(y1 < y2))
        throw DegenerateBoxError("measurement endpoints are collinear along an image axis; hull has zero area");
    return BoundingBox(x1, y1, x2, y2);
}

/// Short axis diameter in millimetres.
inline double sad_mm(const RecistMeasurement& m, double spacing_mm_per_px) {
    if (!(spacing_mm_per_px > 0) || !std::isfinite(spacing_mm_per_px))
        throw InvalidSpacingError("pixel spacing must be positive, got " + std::to_string(spacing_mm_per_px));
    return m.short_axis_px() * spacing_mm_per_px;
}

} // namespace lesionkit
