#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "capd/error.hpp"
#include "capd/io.hpp"
#include "capd/screen/score.hpp"
#include "capd/seqcore/alphabet.hpp"
#include "capd/seqcore/edit.hpp"
#include "capd/seqcore/region.hpp"

namespace capd::screen {

/// Edge rule for clustering. `mutation_count_difference` joins sequences
/// whose distances to the wild type differ by at most the radius.
enum class ClusterMetric { edit_distance, mutation_count_difference };

inline ClusterMetric parse_cluster_metric(const std::string& s) {
    if (s == "edit" || s == "edit_distance") return ClusterMetric::edit_distance;
    if (s == "mutation_count" || s == "mutation_count_difference") return ClusterMetric::mutation_count_difference;
    throw ConfigError("unknown cluster metric '" + s + "'");
}

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0), count_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        --count_;
    }
    std::size_t count() const { return count_; }

private:
    std::vector<std::size_t> parent_, rank_;
    std::size_t count_;
};

}  // namespace detail

/// Component counts of the single-linkage graph at each radius. Duplicate
/// sequences always share a component.
inline std::vector<std::size_t> cluster_curve(const std::vector<std::string>& seqs, const std::vector<std::size_t>& radii,
                                              ClusterMetric metric = ClusterMetric::edit_distance,
                                              const std::string& wt = {}) {
    if (radii.empty()) return {};
    std::vector<std::string> uniq(seqs.begin(), seqs.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const std::size_t n = uniq.size();
    const std::size_t rmax = *std::max_element(radii.begin(), radii.end());

    // Edges (distance, i, j) with distance <= rmax.
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> edges;
    if (metric == ClusterMetric::edit_distance) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const std::size_t la = uniq[i].size(), lb = uniq[j].size();
                if ((la > lb ? la - lb : lb - la) > rmax) continue;
                const std::size_t d = seq::edit_distance_bounded(uniq[i], uniq[j], rmax);
                if (d <= rmax) edges.emplace_back(d, i, j);
            }
    } else {
        if (wt.empty()) throw ConfigError("mutation-count clustering needs a wild type");
        std::vector<std::pair<std::size_t, std::size_t>> mc;  // (count, index)
        for (std::size_t i = 0; i < n; ++i) mc.emplace_back(seq::edit_distance(uniq[i], wt), i);
        std::sort(mc.begin(), mc.end());
        // Sorted by count, linking neighbours suffices for single linkage.
        for (std::size_t k = 0; k + 1 < mc.size(); ++k)
            edges.emplace_back(mc[k + 1].first - mc[k].first, mc[k].second, mc[k + 1].second);
    }
    std::sort(edges.begin(), edges.end());

    std::vector<std::size_t> order(radii.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
    std::vector<std::size_t> out(radii.size());
    detail::DisjointSets sets(n);
    std::size_t e = 0;
    for (std::size_t k : order) {
        while (e < edges.size() && std::get<0>(edges[e]) <= radii[k]) {
            sets.unite(std::get<1>(edges[e]), std::get<2>(edges[e]));
            ++e;
        }
        out[k] = sets.count();
    }
    return out;
}

inline std::size_t cluster_count(const std::vector<std::string>& seqs, std::size_t radius,
                                 ClusterMetric metric = ClusterMetric::edit_distance, const std::string& wt = {}) {
    return cluster_curve(seqs, {radius}, metric, wt).front();
}

inline std::string format_cluster_curve(const std::vector<std::size_t>& radii, const std::vector<std::size_t>& counts) {
    std::string out = "radius,cluster_count\n";
    for (std::size_t i = 0; i < radii.size(); ++i) out += std::to_string(radii[i]) + ',' + std::to_string(counts[i]) + '\n';
    return out;
}

using Histogram = std::map<std::size_t, std::size_t>;

struct Distributions {
    Histogram lengths;
    Histogram mutation_counts;
    Histogram insertion_runs;  // one entry per maximal run of inserted residues
};

inline Distributions distributions(const std::vector<std::string>& seqs, const std::string& wt) {
    Distributions d;
    for (const auto& s : seqs) {
        ++d.lengths[s.size()];
        ++d.mutation_counts[seq::edit_distance(s, wt)];
        for (std::size_t run : seq::insertion_run_lengths(s, wt)) ++d.insertion_runs[run];
    }
    return d;
}

inline std::string format_histogram(const Histogram& h, const std::string& key) {
    std::string out = key + ",count\n";
    for (const auto& [k, v] : h) out += std::to_string(k) + ',' + std::to_string(v) + '\n';
    return out;
}

struct HeatmapCell {
    double position = 0.0;  // half-integers are insertion gaps
    char token = 0;         // residue, or the del symbol for deletions
    std::optional<double> fitness;
    bool is_wt = false;
};

/// Position x token grid of single-mutant fitness over a saturation
/// library. Integer positions carry substitutions, the deletion and the wild
/// type residue (flagged); half-integer positions carry insertions.
inline std::vector<HeatmapCell> fitness_heatmap(const std::vector<seq::LibraryVariant>& library,
                                                const std::vector<ScoreRecord>& records) {
    std::unordered_map<std::string, const ScoreRecord*> by_seq;
    for (const auto& r : records) by_seq.emplace(r.sequence, &r);
    auto lookup = [&](const std::string& s) -> std::optional<double> {
        auto it = by_seq.find(s);
        if (it == by_seq.end() || !it->second->has_fitness()) return std::nullopt;
        return it->second->fitness;
    };

    const seq::LibraryVariant* wt = nullptr;
    std::set<double> integer_positions, gap_positions;
    std::map<std::pair<double, char>, std::optional<double>> cells;
    for (const auto& v : library) {
        switch (v.kind) {
            case seq::VariantKind::wild_type: wt = &v; break;
            case seq::VariantKind::substitution:
            case seq::VariantKind::deletion:
                integer_positions.insert(v.position);
                cells[{v.position, v.new_residue}] = lookup(v.sequence);
                break;
            case seq::VariantKind::insertion:
                gap_positions.insert(v.position);
                cells[{v.position, v.new_residue}] = lookup(v.sequence);
                break;
            case seq::VariantKind::generated: break;
        }
    }
    if (!wt) throw DataError("heatmap: library has no wild-type entry");
    const std::optional<double> wt_fitness = lookup(wt->sequence);

    std::string tokens = seq::Alphabet::protein().residues();
    tokens.push_back(seq::Alphabet::kDelSymbol);
    std::vector<double> positions(integer_positions.begin(), integer_positions.end());
    positions.insert(positions.end(), gap_positions.begin(), gap_positions.end());
    std::sort(positions.begin(), positions.end());
    const double first = positions.empty() ? 0.0 : *integer_positions.begin();

    std::vector<HeatmapCell> out;
    for (double p : positions) {
        const bool gap = p != std::floor(p);
        for (char tok : tokens) {
            HeatmapCell c{p, tok, std::nullopt, false};
            if (auto it = cells.find({p, tok}); it != cells.end()) c.fitness = it->second;
            if (!gap && tok != seq::Alphabet::kDelSymbol) {
                const auto idx = static_cast<std::size_t>(p - first);
                if (idx < wt->sequence.size() && wt->sequence[idx] == tok) {
                    c.is_wt = true;
                    c.fitness = wt_fitness;
                }
            }
            out.push_back(c);
        }
    }
    return out;
}

inline std::string format_position(double p) {
    if (p == std::floor(p)) return std::to_string(static_cast<long long>(p));
    return io::fmt_real(p);
}

inline std::string format_heatmap(const std::vector<HeatmapCell>& cells) {
    std::string out = "position,token,fitness,is_wt\n";
    for (const auto& c : cells)
        out += format_position(c.position) + ',' + std::string(1, c.token) + ',' +
               (c.fitness ? io::fmt_real(*c.fitness) : std::string()) + ',' + (c.is_wt ? "1" : "0") + '\n';
    return out;
}

}  // namespace capd::screen
