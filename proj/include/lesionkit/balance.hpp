#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lesionkit/manifest.hpp"
#include "lesionkit/rng.hpp"

namespace lesionkit {

enum class BalanceStrategy { Unbalanced, ByBodyPart, ByLesionCount, BySize };

inline std::string_view strategy_name(BalanceStrategy s) {
    switch (s) {
        case BalanceStrategy::Unbalanced: return "unbalanced";
        case BalanceStrategy::ByBodyPart: return "bodypart";
        case BalanceStrategy::ByLesionCount: return "lesioncount";
        case BalanceStrategy::BySize: return "size";
    }
    return "?";
}

inline std::optional<BalanceStrategy> strategy_from_name(std::string_view s) {
    if (s == "unbalanced") return BalanceStrategy::Unbalanced;
    if (s == "bodypart") return BalanceStrategy::ByBodyPart;
    if (s == "lesioncount") return BalanceStrategy::ByLesionCount;
    if (s == "size") return BalanceStrategy::BySize;
    return std::nullopt;
}

struct BalanceSpec {
    BalanceStrategy strategy = BalanceStrategy::Unbalanced;
    std::uint64_t seed = 0;
    std::optional<std::size_t> target_total; // required iff strategy == Unbalanced

    void validate() const {
        if (strategy == BalanceStrategy::Unbalanced && !target_total)
            throw Error("unbalanced sampling requires a target total");
        if (strategy != BalanceStrategy::Unbalanced && target_total)
            throw Error("target total only applies to the unbalanced strategy");
    }
};

/// Patient grouping by annotated lesion count: G1 holds patients with 1-2
/// lesions, G2 those with 3 or more.
enum class LesionCountGroup { G1, G2 };

inline LesionCountGroup lesion_count_group(std::size_t patient_lesion_count) {
    return patient_lesion_count >= 3 ? LesionCountGroup::G2 : LesionCountGroup::G1;
}

namespace detail {

// Canonical sampler ordering: label code (0 for unlabeled), then lesion_id.
// Makes every sampler a pure function of the annotation *set* and the seed,
// independent of input row order, and keeps serialized outputs byte-stable.
inline std::vector<std::size_t> canonical_order(const DatasetManifest& m) {
    std::vector<std::size_t> idx(m.annotations.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        int ca = m.annotations[a].label ? label_code(*m.annotations[a].label) : 0;
        int cb = m.annotations[b].label ? label_code(*m.annotations[b].label) : 0;
        if (ca != cb) return ca < cb;
        return m.annotations[a].lesion_id < m.annotations[b].lesion_id;
    });
    return idx;
}

inline DatasetManifest collect(const DatasetManifest& m, std::vector<std::size_t> picked,
                               const std::string& provenance_line) {
    std::sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
        int ca = m.annotations[a].label ? label_code(*m.annotations[a].label) : 0;
        int cb = m.annotations[b].label ? label_code(*m.annotations[b].label) : 0;
        if (ca != cb) return ca < cb;
        return m.annotations[a].lesion_id < m.annotations[b].lesion_id;
    });
    DatasetManifest out;
    out.provenance = m.provenance;
    out.provenance.push_back(provenance_line);
    out.annotations.reserve(picked.size());
    for (std::size_t i : picked) out.annotations.push_back(m.annotations[i]);
    return out;
}

} // namespace detail

// Equalizes per-label lesion counts at the minimum count found among the
// labels present, sampling uniformly without replacement within each label.
inline DatasetManifest balance_by_bodypart(const DatasetManifest& train, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_label; // label code -> canonical candidate order
    for (std::size_t i : detail::canonical_order(train)) {
        const auto& a = train.annotations[i];
        if (!a.label)
            throw UnlabeledLesionError("balance by body part requires labeled lesions; '" + a.lesion_id +
                                       "' has none");
        by_label[label_code(*a.label)].push_back(i);
    }
    if (by_label.empty()) throw EmptyClassError("no labeled lesions to balance");
    std::size_t m = by_label.begin()->second.size();
    for (const auto& [code, members] : by_label) m = std::min(m, members.size());

    Rng rng(seed);
    std::vector<std::size_t> picked;
    for (const auto& [code, members] : by_label)
        for (std::size_t j : sample_indices(members.size(), m, rng)) picked.push_back(members[j]);

    return detail::collect(train, std::move(picked),
                           "balance strategy=bodypart seed=" + std::to_string(seed) +
                               " per_label=" + std::to_string(m) +
                               " labels=" + std::to_string(by_label.size()));
}

// Equalizes lesion totals between patient groups G1 (1-2 lesions) and G2
// (3+). The group with fewer lesions is kept whole; patients from the other
// group are drawn whole in seeded random order, each included when its
// lesions still fit under the smaller group's total. Patient counts are not
// balanced, and no patient's lesions are split.
inline DatasetManifest balance_by_lesion_count(const DatasetManifest& train, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i : detail::canonical_order(train)) by_patient[train.annotations[i].patient_id].push_back(i);

    std::vector<std::string> g1, g2; // patient ids, sorted via map order
    std::size_t total1 = 0, total2 = 0;
    for (const auto& [pid, members] : by_patient) {
        if (lesion_count_group(members.size()) == LesionCountGroup::G1) {
            g1.push_back(pid);
            total1 += members.size();
        } else {
            g2.push_back(pid);
            total2 += members.size();
        }
    }
    if (total1 == 0) throw EmptyGroupError("group G1 (patients with 1-2 lesions) is empty");
    if (total2 == 0) throw EmptyGroupError("group G2 (patients with 3+ lesions) is empty");

    const bool g1_smaller = total1 <= total2;
    const std::size_t budget = std::min(total1, total2);
    std::vector<std::string>& larger = g1_smaller ? g2 : g1;
    const std::vector<std::string>& smaller = g1_smaller ? g1 : g2;

    Rng rng(seed);
    rng.shuffle(larger);

    std::vector<std::size_t> picked;
    for (const auto& pid : smaller)
        for (std::size_t i : by_patient.at(pid)) picked.push_back(i);
    std::size_t packed = 0;
    for (const auto& pid : larger) {
        const auto& members = by_patient.at(pid);
        if (packed + members.size() > budget) continue; // whole patients only
        packed += members.size();
        for (std::size_t i : members) picked.push_back(i);
    }

    return detail::collect(train, std::move(picked),
                           "balance strategy=lesioncount seed=" + std::to_string(seed) +
                               " kept_group=" + (g1_smaller ? "G1" : "G2") +
                               " totals=" + std::to_string(budget) + "/" + std::to_string(packed) +
                               " residual_imbalance=" + std::to_string(budget - packed));
}

// Equalizes the two SAD strata at the smaller stratum's count.
inline DatasetManifest balance_by_size(const DatasetManifest& train, std::uint64_t seed) {
    std::vector<std::size_t> large, small;
    for (std::size_t i : detail::canonical_order(train)) {
        if (train.annotations[i].stratum() == SizeStratum::Large)
            large.push_back(i);
        else
            small.push_back(i);
    }
    if (large.empty()) throw EmptyGroupError("stratum SAD >= 10 mm is empty");
    if (small.empty()) throw EmptyGroupError("stratum SAD < 10 mm is empty");
    std::size_t m = std::min(large.size(), small.size());

    Rng rng(seed);
    std::vector<std::size_t> picked;
    for (std::size_t j : sample_indices(large.size(), m, rng)) picked.push_back(large[j]);
    for (std::size_t j : sample_indices(small.size(), m, rng)) picked.push_back(small[j]);

    return detail::collect(train, std::move(picked),
                           "balance strategy=size seed=" + std::to_string(seed) +
                               " per_stratum=" + std::to_string(m));
}

// Uniform sample of target_total lesions without replacement.
inline DatasetManifest sample_unbalanced(const DatasetManifest& train, std::size_t target_total,
                                         std::uint64_t seed) {
    if (target_total > train.size())
        throw SampleSizeError("target total " + std::to_string(target_total) + " exceeds manifest size " +
                              std::to_string(train.size()));
    auto order = detail::canonical_order(train);
    Rng rng(seed);
    std::vector<std::size_t> picked;
    for (std::size_t j : sample_indices(order.size(), target_total, rng)) picked.push_back(order[j]);
    return detail::collect(train, std::move(picked),
                           "balance strategy=unbalanced seed=" + std::to_string(seed) +
                               " target_total=" + std::to_string(target_total));
}

inline DatasetManifest apply_balance(const DatasetManifest& train, const BalanceSpec& spec) {
    spec.validate();
    switch (spec.strategy) {
        case BalanceStrategy::Unbalanced: return sample_unbalanced(train, *spec.target_total, spec.seed);
        case BalanceStrategy::ByBodyPart: return balance_by_bodypart(train, spec.seed);
        case BalanceStrategy::ByLesionCount: return balance_by_lesion_count(train, spec.seed);
        case BalanceStrategy::BySize: return balance_by_size(train, spec.seed);
    }
    throw Error("unknown balance strategy");
}

} // namespace lesionkit
