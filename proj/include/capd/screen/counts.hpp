#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "capd/error.hpp"
#include "capd/io.hpp"

namespace capd::screen {

enum class LibraryKind { plasmid, viral };

inline std::string to_string(LibraryKind k) { return k == LibraryKind::plasmid ? "plasmid" : "viral"; }

struct StrandCounts {
    std::uint64_t fwd = 0;
    std::uint64_t rev = 0;
    std::uint64_t total() const { return fwd + rev; }
    bool operator==(const StrandCounts&) const = default;
};

/// Strand counts per variant, one slot per replicate.
struct VariantCountTable {
    LibraryKind kind = LibraryKind::plasmid;
    std::vector<std::string> replicates;  // replicate labels in first-seen order
    std::map<std::string, std::vector<StrandCounts>> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
    bool contains(const std::string& s) const { return rows.contains(s); }

    std::size_t replicate_index(const std::string& label) {
        for (std::size_t i = 0; i < replicates.size(); ++i)
            if (replicates[i] == label) return i;
        replicates.push_back(label);
        for (auto& [_, v] : rows) v.resize(replicates.size());
        return replicates.size() - 1;
    }

    void add(const std::string& seq, const std::string& replicate, StrandCounts c) {
        if (seq.empty()) throw DataError("empty variant sequence");
        const std::size_t r = replicate_index(replicate);
        auto& slots = rows[seq];
        slots.resize(replicates.size());
        slots[r].fwd += c.fwd;
        slots[r].rev += c.rev;
    }

    /// Counts summed over replicates.
    StrandCounts summed(const std::vector<StrandCounts>& slots) const {
        StrandCounts s;
        for (const auto& c : slots) {
            s.fwd += c.fwd;
            s.rev += c.rev;
        }
        return s;
    }
    StrandCounts summed(const std::string& seq) const { return summed(rows.at(seq)); }

    std::uint64_t grand_total() const {
        std::uint64_t t = 0;
        for (const auto& [_, v] : rows) t += summed(v).total();
        return t;
    }

    /// Copy holding only the listed rows' structure.
    VariantCountTable empty_like() const {
        VariantCountTable t;
        t.kind = kind;
        t.replicates = replicates;
        return t;
    }

    bool operator==(const VariantCountTable&) const = default;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto p = line.find('\t', start);
        out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) return out;
        start = p + 1;
    }
}

inline std::uint64_t parse_count(std::string_view field, const std::string& where, const char* column) {
    if (!field.empty() && field.front() == '-')
        throw DataError(where + ": negative " + column + " count '" + std::string(field) + "'");
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
        throw DataError(where + ": non-integer " + column + " count '" + std::string(field) + "'");
    return v;
}

}  // namespace detail

/// Reads a `sequence<TAB>fwd<TAB>rev[<TAB>replicate]` table. The header row
/// names the columns; they may appear in any order. Errors name the line.
inline VariantCountTable read_counts(std::istream& in, LibraryKind kind, const std::string& source = "counts") {
    VariantCountTable table;
    table.kind = kind;
    std::string line;
    std::size_t lineno = 0;
    int col_seq = -1, col_fwd = -1, col_rev = -1, col_rep = -1;
    std::size_t width = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_tabs(line);
        const std::string where = source + ":" + std::to_string(lineno);
        if (!header) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const std::string name = io::trim(fields[i]);
                const int idx = static_cast<int>(i);
                if (name == "sequence") col_seq = idx;
                else if (name == "fwd") col_fwd = idx;
                else if (name == "rev") col_rev = idx;
                else if (name == "replicate") col_rep = idx;
            }
            if (col_seq < 0) throw DataError(where + ": missing column 'sequence'");
            if (col_fwd < 0) throw DataError(where + ": missing column 'fwd'");
            if (col_rev < 0) throw DataError(where + ": missing column 'rev'");
            width = fields.size();
            header = true;
            continue;
        }
        if (fields.size() != width)
            throw DataError(where + ": expected " + std::to_string(width) + " fields, found " +
                            std::to_string(fields.size()));
        const std::string seq(fields[static_cast<std::size_t>(col_seq)]);
        if (seq.empty()) throw DataError(where + ": empty sequence");
        StrandCounts c;
        c.fwd = detail::parse_count(fields[static_cast<std::size_t>(col_fwd)], where, "fwd");
        c.rev = detail::parse_count(fields[static_cast<std::size_t>(col_rev)], where, "rev");
        const std::string rep = col_rep >= 0 ? std::string(fields[static_cast<std::size_t>(col_rep)]) : "1";
        table.add(seq, rep, c);
    }
    if (!header) throw DataError(source + ": empty file");
    return table;
}

inline VariantCountTable ingest_counts(const std::filesystem::path& path, LibraryKind kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read_counts(in, kind, path.filename().string());
}

/// Inverse of read_counts: one row per (variant, replicate), sorted.
inline std::string format_counts(const VariantCountTable& t) {
    const bool reps = t.replicates.size() > 1 || (t.replicates.size() == 1 && t.replicates[0] != "1");
    std::string out = reps ? "sequence\tfwd\trev\treplicate\n" : "sequence\tfwd\trev\n";
    for (const auto& [seq, slots] : t.rows)
        for (std::size_t r = 0; r < slots.size(); ++r) {
            out += seq + '\t' + std::to_string(slots[r].fwd) + '\t' + std::to_string(slots[r].rev);
            if (reps) out += '\t' + t.replicates[r];
            out += '\n';
        }
    return out;
}

}  // namespace capd::screen
