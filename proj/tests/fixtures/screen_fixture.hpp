#pragma once

// Synthetic plasmid/viral screen with planted viability. Deterministic for a
// given seed; used to produce the checked-in data under tests/data/screen.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "capd/io.hpp"
#include "capd/rng.hpp"
#include "capd/seqcore/region.hpp"

namespace fixture {

struct Component {
    double weight, mean, sd;
};

struct ScreenFixture {
    capd::seq::RegionSpec region{"DEEEIRTTNPVATEQYGSVSTNLQRGNRQAATADVNTQGVLPGMVWQDRD", std::nullopt, 562, 611};
    Component viable{0.6, 1.0, 0.3};
    Component nonviable{0.4, -4.0, 0.5};
    double viral_scale = 2.0;

    std::vector<std::string> design;           // 2,000 unique designed sequences
    std::vector<std::string> extra_design;     // the multi-mutants outside the saturation library
    std::map<std::string, bool> label;         // planted viability
    std::map<std::string, double> phi;         // planted log2 effect
    std::set<std::string> imbalanced;          // viral strands skewed on purpose
    std::set<std::string> dropout;             // designed but never seen in the viral pool
    std::string plasmid_tsv, viral_tsv, control_csv, truth_csv;
    double offset = 0.0;  // log2(sum plasmid / sum viral) + log2(scale), over the design
};

inline ScreenFixture make_screen_fixture(std::uint64_t seed = 7) {
    ScreenFixture f;
    capd::Rng rng(seed);
    const std::string& wt = f.region.wt_region;
    const std::string& residues = capd::seq::Alphabet::protein().residues();

    std::set<std::string> seen;
    for (const auto& v : capd::seq::saturation_library(f.region))
        if (seen.insert(v.sequence).second) f.design.push_back(v.sequence);
    while (f.design.size() < 2000) {
        std::string s = wt;
        const std::size_t k = 2 + rng.below(3);
        for (std::size_t j = 0; j < k; ++j) s[rng.below(s.size())] = residues[rng.below(residues.size())];
        if (seen.insert(s).second) {
            f.design.push_back(s);
            f.extra_design.push_back(s);
        }
    }

    std::vector<std::uint64_t> plasmid(f.design.size()), viral(f.design.size());
    std::vector<double> plasmid_fwd_share(f.design.size()), viral_fwd_share(f.design.size());
    double total_p = 0.0, total_v = 0.0;
    for (std::size_t i = 0; i < f.design.size(); ++i) {
        const auto& s = f.design[i];
        const bool ok = rng.uniform() < f.viable.weight;
        const Component& c = ok ? f.viable : f.nonviable;
        f.label[s] = ok;
        f.phi[s] = rng.normal(c.mean, c.sd);
        plasmid[i] = static_cast<std::uint64_t>(rng.between(500, 1500));
        plasmid_fwd_share[i] = 0.4 + 0.2 * rng.uniform();
        viral[i] = static_cast<std::uint64_t>(std::llround(static_cast<double>(plasmid[i]) * std::exp2(f.phi[s]) * f.viral_scale));
        viral_fwd_share[i] = 0.4 + 0.2 * rng.uniform();
        if (i % 100 == 37) f.imbalanced.insert(s);
        if (i % 200 == 123) f.dropout.insert(s);
        total_p += static_cast<double>(plasmid[i]);
        total_v += static_cast<double>(viral[i]);
    }
    f.offset = std::log2(total_p / total_v) + std::log2(f.viral_scale);

    auto split = [](std::uint64_t n, double share) {
        const auto fwd = static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * share));
        return std::pair<std::uint64_t, std::uint64_t>{fwd, n - fwd};
    };
    f.plasmid_tsv = "sequence\tfwd\trev\n";
    f.viral_tsv = "sequence\tfwd\trev\n";
    for (std::size_t i = 0; i < f.design.size(); ++i) {
        const auto& s = f.design[i];
        auto [pf, pr] = split(plasmid[i], plasmid_fwd_share[i]);
        f.plasmid_tsv += s + '\t' + std::to_string(pf) + '\t' + std::to_string(pr) + '\n';
        if (f.dropout.contains(s)) continue;
        auto [vf, vr] = split(viral[i], viral_fwd_share[i]);
        if (f.imbalanced.contains(s)) {
            vf = viral[i];
            vr = viral[i] / 50;
        }
        f.viral_tsv += s + '\t' + std::to_string(vf) + '\t' + std::to_string(vr) + '\n';
    }
    // Reads from outside the design: low-count noise, plentiful enough that the
    // viral percentile cut lands among them.
    for (int j = 0; j < 12000; ++j) {
        std::string s;
        const std::size_t len = 45 + rng.below(10);
        for (std::size_t k = 0; k < len; ++k) s.push_back(residues[rng.below(residues.size())]);
        if (seen.contains(s)) continue;
        const std::uint64_t fwd = j % 10 == 0 ? 0 : 1 + rng.below(2), rev = 1 + rng.below(2);
        f.viral_tsv += s + '\t' + std::to_string(fwd) + '\t' + std::to_string(rev) + '\n';
    }

    f.control_csv = "fitness,label\n";
    for (int j = 0; j < 1000; ++j) {
        const bool ok = rng.uniform() < f.viable.weight;
        const Component& c = ok ? f.viable : f.nonviable;
        f.control_csv += capd::io::fmt_real(rng.normal(c.mean, c.sd) + f.offset) + ',' + (ok ? "1" : "0") + '\n';
    }

    f.truth_csv = "sequence,viable,phi\n";
    for (const auto& s : f.design) f.truth_csv += s + ',' + (f.label[s] ? "1" : "0") + ',' + capd::io::fmt_real(f.phi[s]) + '\n';
    return f;
}

inline void write_screen_fixture(const ScreenFixture& f, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    capd::io::write_atomic(dir / "plasmid.tsv", f.plasmid_tsv);
    capd::io::write_atomic(dir / "viral.tsv", f.viral_tsv);
    capd::io::write_atomic(dir / "control.csv", f.control_csv);
    capd::io::write_atomic(dir / "truth.csv", f.truth_csv);
    capd::io::write_atomic(dir / "region.json", f.region.to_json().dump(2) + "\n");
    std::string extra;
    for (const auto& s : f.extra_design) extra += s + '\n';
    capd::io::write_atomic(dir / "extra_design.txt", extra);
}

}  // namespace fixture
