#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "capd/error.hpp"
#include "capd/screen/counts.hpp"

namespace capd::screen {

/// Value at 1-based `rank` of the ascending order; rank is clamped to [1, n].
inline std::uint64_t value_at_rank(std::vector<std::uint64_t> v, std::size_t rank) {
    if (v.empty()) throw DataError("rank of an empty list");
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
    return v[rank - 1];
}

/// ceil(x) robust to x landing a hair above an integer through rounding.
inline std::size_t ceil_rank(double x) {
    return static_cast<std::size_t>(std::max(0.0, std::ceil(x - 1e-9)));
}

/// Nearest-rank percentile: the value at rank ceil(pct/100 * n).
inline std::uint64_t nearest_rank_percentile(const std::vector<std::uint64_t>& v, double pct) {
    return value_at_rank(v, ceil_rank(pct / 100.0 * static_cast<double>(v.size())));
}

struct FilterOutcome {
    VariantCountTable table;
    std::vector<std::string> removed;  // sorted
    std::optional<double> threshold;
};

template <typename Keep>
FilterOutcome partition_rows(const VariantCountTable& in, Keep keep) {
    FilterOutcome out{in.empty_like(), {}, std::nullopt};
    for (const auto& [seq, slots] : in.rows) {
        if (keep(seq, in.summed(slots)))
            out.table.rows.emplace(seq, slots);
        else
            out.removed.push_back(seq);
    }
    return out;
}

/// Drops variants whose strand counts (summed over replicates) are too
/// lopsided: min(fwd, rev) / max(fwd, rev) < min_ratio. 0/0 is dropped.
inline FilterOutcome filter_fr_imbalance(const VariantCountTable& t, double min_ratio = 0.1) {
    if (!(min_ratio >= 0.0 && min_ratio <= 1.0)) throw ConfigError("min_ratio must be in [0, 1]");
    auto out = partition_rows(t, [&](const std::string&, StrandCounts c) {
        const auto hi = std::max(c.fwd, c.rev), lo = std::min(c.fwd, c.rev);
        if (hi == 0) return false;
        return static_cast<double>(lo) / static_cast<double>(hi) >= min_ratio;
    });
    out.threshold = min_ratio;
    return out;
}

/// Drops variants whose total count is below the nearest-rank pct-th
/// percentile of totals. With `fixed_threshold` that value is used instead.
inline FilterOutcome filter_percentile(const VariantCountTable& t, double pct = 80.0,
                                       std::optional<std::uint64_t> fixed_threshold = std::nullopt) {
    if (!(pct >= 0.0 && pct <= 100.0)) throw ConfigError("percentile must be in [0, 100]");
    if (t.empty()) throw DataError("percentile filter: empty table");
    std::uint64_t threshold;
    if (fixed_threshold) {
        threshold = *fixed_threshold;
    } else {
        std::vector<std::uint64_t> totals;
        totals.reserve(t.size());
        for (const auto& [_, slots] : t.rows) totals.push_back(t.summed(slots).total());
        threshold = nearest_rank_percentile(totals, pct);
    }
    auto out = partition_rows(t, [&](const std::string&, StrandCounts c) { return c.total() >= threshold; });
    out.threshold = static_cast<double>(threshold);
    return out;
}

inline FilterOutcome filter_design_membership(const VariantCountTable& t,
                                              const std::unordered_set<std::string>& design) {
    return partition_rows(t, [&](const std::string& s, StrandCounts) { return design.contains(s); });
}

/// Drops plasmid variants below the nearest-rank (1 - retain) quantile,
/// taken as the value at rank n - ceil(retain * n) + 1 so that exactly the
/// bottom n - ceil(retain * n) ranks fall under it when counts are distinct.
inline FilterOutcome filter_plasmid_floor(const VariantCountTable& t, double retain = 0.99,
                                          std::optional<std::uint64_t> fixed_floor = std::nullopt) {
    if (!(retain >= 0.0 && retain <= 1.0)) throw ConfigError("retain must be in [0, 1]");
    if (t.kind != LibraryKind::plasmid) throw DataError("plasmid floor applies to the plasmid library");
    if (t.empty()) return {t, {}, 0.0};
    std::uint64_t floor;
    if (fixed_floor) {
        floor = *fixed_floor;
    } else {
        std::vector<std::uint64_t> totals;
        totals.reserve(t.size());
        for (const auto& [_, slots] : t.rows) totals.push_back(t.summed(slots).total());
        const std::size_t n = totals.size();
        const std::size_t kept = std::min(n, ceil_rank(retain * static_cast<double>(n)));
        floor = value_at_rank(totals, n - kept + 1);
    }
    auto out = partition_rows(t, [&](const std::string&, StrandCounts c) { return c.total() >= floor; });
    out.threshold = static_cast<double>(floor);
    return out;
}

struct CascadeConfig {
    double min_ratio = 0.1;
    double viral_percentile = 80.0;
    double plasmid_retain = 0.99;
    bool imbalance_on_plasmid = true;

    static CascadeConfig from_json(const nlohmann::json& j) {
        CascadeConfig c;
        try {
            if (j.contains("min_ratio")) c.min_ratio = j.at("min_ratio").get<double>();
            if (j.contains("viral_percentile")) c.viral_percentile = j.at("viral_percentile").get<double>();
            if (j.contains("plasmid_retain")) c.plasmid_retain = j.at("plasmid_retain").get<double>();
            if (j.contains("imbalance_on_plasmid")) c.imbalance_on_plasmid = j.at("imbalance_on_plasmid").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("screen filter config: ") + e.what());
        }
        return c;
    }
};

/// Thresholds the cascade settled on; feeding them back reproduces the run.
struct CascadeThresholds {
    std::uint64_t viral_percentile_count = 0;
    std::uint64_t plasmid_floor = 0;
};

struct StageReport {
    std::string stage;
    std::string library;
    std::size_t input = 0;
    std::size_t removed = 0;
    std::optional<double> threshold;
};

struct CascadeResult {
    VariantCountTable plasmid;
    VariantCountTable viral;
    std::vector<StageReport> stages;
    CascadeThresholds thresholds;
};

/// Imbalance (both libraries) -> viral percentile -> design membership
/// (both) -> plasmid floor. With `fixed` the data-driven thresholds are not
/// recomputed, which makes a second pass over the output a no-op.
inline CascadeResult run_cascade(const VariantCountTable& plasmid, const VariantCountTable& viral,
                                 const std::unordered_set<std::string>* design, const CascadeConfig& cfg,
                                 const std::optional<CascadeThresholds>& fixed = std::nullopt) {
    if (plasmid.kind != LibraryKind::plasmid || viral.kind != LibraryKind::viral)
        throw DataError("cascade expects a plasmid and a viral table");
    if (plasmid.empty()) throw DataError("plasmid table is empty");
    if (viral.empty()) throw DataError("viral table is empty");
    CascadeResult r;
    auto record = [&](const char* stage, const FilterOutcome& o, const VariantCountTable& input) {
        r.stages.push_back({stage, to_string(input.kind), input.size(), o.removed.size(), o.threshold});
    };

    FilterOutcome p = {plasmid, {}, std::nullopt};
    if (cfg.imbalance_on_plasmid) {
        p = filter_fr_imbalance(plasmid, cfg.min_ratio);
        record("fr_imbalance", p, plasmid);
    }
    FilterOutcome v = filter_fr_imbalance(viral, cfg.min_ratio);
    record("fr_imbalance", v, viral);
    if (v.table.empty()) throw DataError("viral table is empty after imbalance filter");

    const auto vin = v.table;
    v = filter_percentile(vin, cfg.viral_percentile,
                          fixed ? std::optional<std::uint64_t>(fixed->viral_percentile_count) : std::nullopt);
    record("percentile", v, vin);
    r.thresholds.viral_percentile_count = static_cast<std::uint64_t>(*v.threshold);

    if (design) {
        const auto pin = p.table;
        p = filter_design_membership(pin, *design);
        record("design_membership", p, pin);
        const auto vin2 = v.table;
        v = filter_design_membership(vin2, *design);
        record("design_membership", v, vin2);
    }

    const auto pin = p.table;
    p = filter_plasmid_floor(pin, cfg.plasmid_retain,
                             fixed ? std::optional<std::uint64_t>(fixed->plasmid_floor) : std::nullopt);
    record("plasmid_floor", p, pin);
    r.thresholds.plasmid_floor = static_cast<std::uint64_t>(*p.threshold);

    r.plasmid = std::move(p.table);
    r.viral = std::move(v.table);
    return r;
}

}  // namespace capd::screen
