#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "capd/error.hpp"
#include "capd/seqcore/alphabet.hpp"
#include "capd/seqcore/edit.hpp"

namespace capd::seq {

/// A hypervariable region of a capsid. Coordinates are 1-based inclusive
/// residue numbers within `full_wt`.
struct RegionSpec {
    std::string wt_region;
    std::optional<std::string> full_wt;
    std::int64_t start = 1;
    std::int64_t end = 1;

    std::size_t length() const { return wt_region.size(); }

    void validate() const {
        if (wt_region.empty()) throw ConfigError("region: wt_region is empty");
        if (end < start) throw ConfigError("region: end must be >= start");
        if (static_cast<std::size_t>(end - start + 1) != wt_region.size())
            throw ConfigError("region: start..end spans " + std::to_string(end - start + 1) +
                              " residues but wt_region has " + std::to_string(wt_region.size()));
        check_residues(wt_region);
        if (full_wt) {
            check_residues(*full_wt);
            if (start < 1 || static_cast<std::size_t>(end) > full_wt->size())
                throw ConfigError("region: coordinates outside full_wt");
            if (full_wt->compare(static_cast<std::size_t>(start - 1), wt_region.size(), wt_region) != 0)
                throw ConfigError("region: full_wt[start..end] does not match wt_region");
        }
    }

    static RegionSpec from_json(const nlohmann::json& j) {
        RegionSpec r;
        try {
            r.wt_region = j.at("wt_region").get<std::string>();
            r.start = j.at("start").get<std::int64_t>();
            r.end = j.at("end").get<std::int64_t>();
            if (j.contains("full_wt") && !j.at("full_wt").is_null())
                r.full_wt = j.at("full_wt").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("region config: ") + e.what());
        }
        r.validate();
        return r;
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"wt_region", wt_region}, {"start", start}, {"end", end}};
        if (full_wt) j["full_wt"] = *full_wt;
        return j;
    }

private:
    static void check_residues(const std::string& s) {
        for (char c : s)
            if (!Alphabet::protein().is_residue(c))
                throw ConfigError(std::string("region: unknown residue character '") + c + "'");
    }
};

struct TransferResult {
    std::string full_sequence;
    std::size_t mutations_vs_target = 0;
    std::size_t mutations_vs_source = 0;
};

/// Splices a region generated for `source` into the capsid of `target`.
inline TransferResult transfer_region(std::string_view generated_region, const RegionSpec& source,
                                      const RegionSpec& target) {
    if (!target.full_wt) throw ConfigError("transfer: target region has no full_wt sequence");
    const auto begin = static_cast<std::size_t>(target.start - 1);
    TransferResult r;
    r.full_sequence = target.full_wt->substr(0, begin);
    r.full_sequence.append(generated_region);
    r.full_sequence.append(target.full_wt->substr(begin + target.wt_region.size()));
    r.mutations_vs_target = edit_distance(generated_region, target.wt_region);
    r.mutations_vs_source = edit_distance(generated_region, source.wt_region);
    return r;
}

enum class VariantKind { wild_type, substitution, deletion, insertion, generated };

inline const char* to_string(VariantKind k) {
    switch (k) {
        case VariantKind::wild_type: return "wild_type";
        case VariantKind::substitution: return "substitution";
        case VariantKind::deletion: return "deletion";
        case VariantKind::insertion: return "insertion";
        case VariantKind::generated: return "generated";
    }
    return "?";
}

/// One member of a designed library. `position` is a residue coordinate;
/// insertions sit at k + 0.5 for the gap after residue k.
struct LibraryVariant {
    std::string sequence;
    VariantKind kind = VariantKind::wild_type;
    double position = 0.0;
    char new_residue = 0;  // del symbol for deletions, 0 for wild type

    bool operator==(const LibraryVariant&) const = default;
};

/// Every single substitution, deletion and interior insertion of the region.
///
/// Distinct edits can spell the same sequence (deleting either residue of a
/// repeated pair, or inserting a residue next to an identical one), so the
/// list is unique per (kind, position, residue) rather than per sequence.
inline std::vector<LibraryVariant> saturation_library(const RegionSpec& region, bool include_insertions = true,
                                                      bool include_deletions = true) {
    const std::string& wt = region.wt_region;
    if (wt.empty()) throw ConfigError("saturation library: empty wild-type region");
    const auto& residues = Alphabet::protein().residues();
    const std::size_t n = wt.size();

    std::vector<LibraryVariant> out;
    out.reserve(19 * n + n + 20 * (n - 1) + 1);
    out.push_back({wt, VariantKind::wild_type, 0.0, 0});

    auto coord = [&](std::size_t i) { return static_cast<double>(region.start + static_cast<std::int64_t>(i)); };

    for (std::size_t i = 0; i < n; ++i) {
        for (char r : residues) {
            if (r == wt[i]) continue;
            std::string s = wt;
            s[i] = r;
            out.push_back({std::move(s), VariantKind::substitution, coord(i), r});
        }
    }
    if (include_deletions) {
        for (std::size_t i = 0; i < n; ++i) {
            std::string s = wt;
            s.erase(i, 1);
            out.push_back({std::move(s), VariantKind::deletion, coord(i), Alphabet::kDelSymbol});
        }
    }
    if (include_insertions) {
        for (std::size_t gap = 0; gap + 1 < n; ++gap) {
            for (char r : residues) {
                std::string s = wt;
                s.insert(gap + 1, 1, r);
                out.push_back({std::move(s), VariantKind::insertion, coord(gap) + 0.5, r});
            }
        }
    }
    return out;
}

/// Random-subset variant of the insertion scan: `per_gap` residues drawn
/// without replacement for every interior gap.
template <typename RngT>
std::vector<LibraryVariant> saturation_library_sampled_insertions(const RegionSpec& region, std::size_t per_gap,
                                                                  bool include_deletions, RngT& rng) {
    auto lib = saturation_library(region, false, include_deletions);
    const auto& residues = Alphabet::protein().residues();
    const std::string& wt = region.wt_region;
    per_gap = std::min(per_gap, residues.size());
    for (std::size_t gap = 0; gap + 1 < wt.size(); ++gap) {
        std::vector<char> pool(residues.begin(), residues.end());
        rng.shuffle(pool);
        for (std::size_t k = 0; k < per_gap; ++k) {
            std::string s = wt;
            s.insert(gap + 1, 1, pool[k]);
            lib.push_back({std::move(s), VariantKind::insertion,
                           static_cast<double>(region.start + static_cast<std::int64_t>(gap)) + 0.5, pool[k]});
        }
    }
    return lib;
}

}  // namespace capd::seq
