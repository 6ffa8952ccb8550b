#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "capd/io.hpp"

namespace cli {

inline const std::string kBinary = CAPD_CLI_PATH;
inline const std::filesystem::path kData = CAPD_TEST_DATA;

/// Runs the capd binary with `args`, returning its exit status.
inline int run(const std::string& args, bool quiet = true) {
    std::string cmd = kBinary + " " + args;
    if (quiet) cmd += " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("capd_cli_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
    return capd::io::read_text(a) == capd::io::read_text(b);
}

/// Command line for the checked-in screen fixture.
inline std::string screen_args(const std::string& mode, const std::filesystem::path& out) {
    const auto d = kData / "screen";
    std::string a = "screen --plasmid " + (d / "plasmid.tsv").string() + " --viral " + (d / "viral.tsv").string() +
                    " --region " + (d / "region.json").string() + " --design " + (d / "extra_design.txt").string() +
                    " --mode " + mode + " --out-dir " + out.string();
    if (mode == "control-calibrated") a += " --control " + (d / "control.csv").string();
    return a;
}

inline const char* kScreenOutputs[] = {"scores.csv", "filter_report.json", "viability_by_mutation_count.csv",
                                       "heatmap.csv"};

}  // namespace cli
