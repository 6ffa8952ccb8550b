#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "capd/error.hpp"
#include "capd/io.hpp"
#include "capd/screen/gmm.hpp"
#include "capd/screen/score.hpp"

namespace capd::screen {

/// Scale the mixture is fitted on. Thresholds on log2 fitness and on
/// enrichment give the same calls since log2 is monotone.
enum class ScoreScale { log2_fitness, enrichment };

inline ScoreScale parse_score_scale(const std::string& s) {
    if (s == "log2" || s == "fitness") return ScoreScale::log2_fitness;
    if (s == "enrichment") return ScoreScale::enrichment;
    throw ConfigError("unknown score scale '" + s + "' (expected log2 or enrichment)");
}

inline std::string to_string(ScoreScale s) { return s == ScoreScale::log2_fitness ? "log2" : "enrichment"; }

inline double scale_value(const ScoreRecord& r, ScoreScale s) {
    return s == ScoreScale::log2_fitness ? r.fitness : r.enrichment;
}

/// Enrichment value equivalent to a threshold on the given scale.
inline double enrichment_threshold(double threshold, ScoreScale s) {
    return s == ScoreScale::log2_fitness ? std::exp2(threshold) : threshold;
}

/// viable = score >= threshold. Records with zero enrichment are never viable.
inline void call_viability(std::vector<ScoreRecord>& records, double threshold, ScoreScale scale) {
    for (auto& r : records) {
        const double v = scale_value(r, scale);
        r.viable = r.enrichment > 0.0 && std::isfinite(v) && v >= threshold;
    }
}

inline void call_viability(std::vector<ScoreRecord>& records, const GaussianMixture2& g, ScoreScale scale) {
    call_viability(records, g.threshold, scale);
}

struct ViabilityRow {
    std::size_t sequence_count = 0;
    double viable_fraction = 0.0;
    std::size_t num_mutations = 0;
};

/// Rows ordered by mutation count.
inline std::vector<ViabilityRow> viability_by_mutation_count(const std::vector<ScoreRecord>& records) {
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> groups;  // count -> (n, viable)
    for (const auto& r : records) {
        auto& g = groups[r.mutation_count];
        ++g.first;
        g.second += r.viable;
    }
    std::vector<ViabilityRow> rows;
    for (const auto& [m, g] : groups)
        rows.push_back({g.first, static_cast<double>(g.second) / static_cast<double>(g.first), m});
    return rows;
}

/// Column order sequence count, % viable, number of mutations.
inline std::string format_viability(const std::vector<ViabilityRow>& rows) {
    std::string out = "sequence_count,percent_viable,num_mutations\n";
    for (const auto& r : rows)
        out += std::to_string(r.sequence_count) + ',' + io::fmt_real(100.0 * r.viable_fraction) + ',' +
               std::to_string(r.num_mutations) + '\n';
    return out;
}

struct ControlSample {
    double value = 0.0;
    int label = -1;  // 1 viable, 0 not, -1 unlabeled
};

/// Labeled control scores: a CSV with a header naming a `fitness` or
/// `enrichment` column and optionally a `label` column (1/0, viable/nonviable).
inline std::vector<ControlSample> read_control_csv(const std::string& text, ScoreScale scale,
                                                   const std::string& source = "control") {
    std::vector<ControlSample> out;
    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            auto p = text.find('\n', start);
            if (p == std::string::npos) p = text.size();
            lines.push_back(io::trim(std::string_view(text).substr(start, p - start)));
            start = p + 1;
        }
    }
    auto split = [](const std::string& s) {
        std::vector<std::string> f;
        std::size_t a = 0;
        while (true) {
            auto p = s.find(',', a);
            f.push_back(io::trim(s.substr(a, p == std::string::npos ? std::string::npos : p - a)));
            if (p == std::string::npos) return f;
            a = p + 1;
        }
    };
    int value_col = -1, label_col = -1;
    bool header = false, from_enrichment = false;
    std::size_t width = 0;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (lines[ln].empty()) continue;
        const auto f = split(lines[ln]);
        const std::string where = source + ":" + std::to_string(ln + 1);
        if (!header) {
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (f[i] == "fitness" && (value_col < 0 || scale == ScoreScale::log2_fitness)) {
                    value_col = static_cast<int>(i);
                    from_enrichment = false;
                } else if (f[i] == "enrichment" && (value_col < 0 || scale == ScoreScale::enrichment)) {
                    value_col = static_cast<int>(i);
                    from_enrichment = true;
                } else if (f[i] == "label") {
                    label_col = static_cast<int>(i);
                }
            }
            if (value_col < 0) throw DataError(where + ": control needs a 'fitness' or 'enrichment' column");
            width = f.size();
            header = true;
            continue;
        }
        if (f.size() != width) throw DataError(where + ": wrong number of fields");
        ControlSample c;
        const std::string& raw = f[static_cast<std::size_t>(value_col)];
        char* end = nullptr;
        double v = raw.empty() ? -HUGE_VAL : std::strtod(raw.c_str(), &end);
        if (!raw.empty() && (end == raw.c_str() || *end != '\0')) throw DataError(where + ": bad number '" + raw + "'");
        if (from_enrichment && scale == ScoreScale::log2_fitness) v = v > 0 ? std::log2(v) : -HUGE_VAL;
        if (!from_enrichment && scale == ScoreScale::enrichment) v = std::exp2(v);
        c.value = v;
        if (label_col >= 0) {
            const std::string& l = f[static_cast<std::size_t>(label_col)];
            if (l == "1" || l == "viable" || l == "true") c.label = 1;
            else if (l == "0" || l == "nonviable" || l == "false") c.label = 0;
            else if (!l.empty()) throw DataError(where + ": bad label '" + l + "'");
        }
        out.push_back(c);
    }
    if (!header) throw DataError(source + ": empty file");
    return out;
}

}  // namespace capd::screen
