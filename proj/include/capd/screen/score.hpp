#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "capd/error.hpp"
#include "capd/io.hpp"
#include "capd/screen/counts.hpp"
#include "capd/seqcore/edit.hpp"

namespace capd::screen {

struct ScoreRecord {
    std::string sequence;
    double f_plasmid = 0.0;
    double f_viral = 0.0;
    double enrichment = 0.0;
    double fitness = -std::numeric_limits<double>::infinity();  // -inf when enrichment is 0
    bool viable = false;
    std::size_t mutation_count = 0;

    bool has_fitness() const { return std::isfinite(fitness); }
};

struct ScoreSummary {
    std::size_t universe = 0;
    std::size_t viral_absent = 0;
    std::size_t viral_outside_universe = 0;
};

/// Frequencies over the plasmid-retained universe, enrichment f_v / f_p and
/// log2 fitness. Viral counts for sequences outside the universe are ignored;
/// universe members missing from the viral table score 0.
inline std::vector<ScoreRecord> score(const VariantCountTable& plasmid, const VariantCountTable& viral,
                                      const std::string& wt, ScoreSummary* summary = nullptr) {
    if (plasmid.empty()) throw DataError("score: no variants retained in the plasmid library");
    std::uint64_t p_total = 0, v_total = 0;
    ScoreSummary sum;
    for (const auto& [seq, slots] : plasmid.rows) {
        p_total += plasmid.summed(slots).total();
        if (auto it = viral.rows.find(seq); it != viral.rows.end()) v_total += viral.summed(it->second).total();
    }
    for (const auto& [seq, _] : viral.rows)
        if (!plasmid.contains(seq)) ++sum.viral_outside_universe;
    if (v_total == 0) throw DataError("score: no viral reads on retained variants");
    std::vector<ScoreRecord> out;
    out.reserve(plasmid.size());
    for (const auto& [seq, slots] : plasmid.rows) {
        ScoreRecord r;
        r.sequence = seq;
        const std::uint64_t cp = plasmid.summed(slots).total();
        if (cp == 0) throw NumericError("score: zero plasmid count survived the floor filter: " + seq);
        r.f_plasmid = static_cast<double>(cp) / static_cast<double>(p_total);
        std::uint64_t cv = 0;
        if (auto it = viral.rows.find(seq); it != viral.rows.end())
            cv = viral.summed(it->second).total();
        else
            ++sum.viral_absent;
        r.f_viral = static_cast<double>(cv) / static_cast<double>(v_total);
        r.enrichment = r.f_viral / r.f_plasmid;
        if (r.enrichment > 0.0) r.fitness = std::log2(r.enrichment);
        r.mutation_count = seq::edit_distance(seq, wt);
        out.push_back(std::move(r));
    }
    sum.universe = out.size();
    if (summary) *summary = sum;
    return out;
}

inline std::string format_scores(const std::vector<ScoreRecord>& records) {
    std::string out = "sequence,f_plasmid,f_viral,enrichment,fitness,viable,mutation_count\n";
    for (const auto& r : records) {
        out += r.sequence + ',' + io::fmt_real(r.f_plasmid) + ',' + io::fmt_real(r.f_viral) + ',' +
               io::fmt_real(r.enrichment) + ',' + (r.has_fitness() ? io::fmt_real(r.fitness) : std::string()) + ',' +
               (r.viable ? "1" : "0") + ',' + std::to_string(r.mutation_count) + '\n';
    }
    return out;
}

}  // namespace capd::screen
