#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "capd/error.hpp"

namespace capd::io {

struct FastaRecord {
    std::string header;  // without the leading '>'
    std::string sequence;
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<FastaRecord> parse_fasta(std::string_view text) {
    std::vector<FastaRecord> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '>') {
            out.push_back({t.substr(1), {}});
        } else {
            if (out.empty()) throw DataError("FASTA: sequence line before first header");
            out.back().sequence += t;
        }
    }
    return out;
}

/// Reads either FASTA or a plain one-sequence-per-line list.
inline std::vector<std::string> read_sequences(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    std::vector<std::string> seqs;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '>') {
        for (auto& r : parse_fasta(text)) seqs.push_back(std::move(r.sequence));
        return seqs;
    }
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (!t.empty() && t.front() != '#') seqs.push_back(std::move(t));
    }
    return seqs;
}

inline std::string format_fasta(const std::vector<FastaRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += '>';
        out += r.header;
        out += '\n';
        out += r.sequence;
        out += '\n';
    }
    return out;
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partially written artifact.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Float formatting used by every CSV artifact: 12 significant digits.
inline std::string fmt_real(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace capd::io
