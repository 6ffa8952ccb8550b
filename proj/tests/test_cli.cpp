#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "capd/io.hpp"
#include "capd/rng.hpp"
#include "cli_support.hpp"
#include "fixtures/screen_fixture.hpp"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"({
  "model": {"layers": 2, "hidden": 16, "heads": 2, "intermediate": 32, "canvas_length": 12, "T": 20},
  "train": {"learning_rate": 0.003, "batch_size": 16, "max_steps": 150}
})";

fs::path toy_dir() {
    static const fs::path dir = [] {
        auto d = cli::scratch(std::string("toy_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        capd::io::write_atomic(d / "config.json", kTinyConfig);
        capd::Rng rng(1);
        const std::string res = "ACDEFGHIKLMNPQRSTVWY";
        std::string data;
        for (int i = 0; i < 50; ++i) {
            std::string s = "WCH";
            const std::size_t extra = 3 + rng.below(5);
            for (std::size_t k = 0; k < extra; ++k) s.push_back(res[rng.below(20)]);
            data += s + "\n";
        }
        capd::io::write_atomic(d / "toy.txt", data);
        return d;
    }();
    return dir;
}

std::vector<double> losses(const fs::path& log) {
    std::vector<double> out;
    std::istringstream in(capd::io::read_text(log));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,loss,lr");
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        out.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    }
    return out;
}

std::size_t fasta_records(const fs::path& p) {
    return capd::io::parse_fasta(capd::io::read_text(p)).size();
}

}  // namespace

TEST(Cli, MissingConfigIsConfigError) {
    const auto d = toy_dir();
    EXPECT_EQ(cli::run("--config " + (d / "nope.json").string() + " train --data " + (d / "toy.txt").string() +
                       " --out " + (d / "x.capd").string()),
              2);
    EXPECT_EQ(cli::run("frobnicate"), 2);
    EXPECT_EQ(cli::run("train --data " + (d / "missing.txt").string() + " --out " + (d / "x.capd").string()), 3);
}

TEST(Cli, TrainIsDeterministicAndLearns) {
    const auto d = toy_dir();
    const std::string base = "--seed 11 --config " + (d / "config.json").string() + " train --data " + (d / "toy.txt").string();
    ASSERT_EQ(cli::run(base + " --out " + (d / "a.capd").string() + " --log " + (d / "a.csv").string()), 0);
    ASSERT_EQ(cli::run(base + " --out " + (d / "b.capd").string() + " --log " + (d / "b.csv").string()), 0);
    EXPECT_TRUE(fs::exists(d / "a.capd"));
    EXPECT_TRUE(cli::same_bytes(d / "a.csv", d / "b.csv"));
    EXPECT_TRUE(cli::same_bytes(d / "a.capd", d / "b.capd"));
    const auto l = losses(d / "a.csv");
    ASSERT_EQ(l.size(), 150u);
    double head = 0, tail = 0;
    for (int i = 0; i < 20; ++i) {
        head += l[static_cast<std::size_t>(i)];
        tail += l[l.size() - 1 - static_cast<std::size_t>(i)];
    }
    EXPECT_LT(tail, head);
}

TEST(Cli, GenerateRespectsCountSeedAndTrainingOverlap) {
    const auto d = toy_dir();
    ASSERT_EQ(cli::run("--seed 11 --config " + (d / "config.json").string() + " train --data " + (d / "toy.txt").string() +
                       " --out " + (d / "g.capd").string()),
              0);
    const std::string gen = "generate --model " + (d / "g.capd").string() + " -n 10 --wt WCHAAAA";
    ASSERT_EQ(cli::run("--seed 4 " + gen + " --out " + (d / "g1.fa").string()), 0);
    ASSERT_EQ(cli::run("--seed 4 " + gen + " --out " + (d / "g2.fa").string()), 0);
    EXPECT_LE(fasta_records(d / "g1.fa"), 10u);
    EXPECT_GT(fasta_records(d / "g1.fa"), 0u);
    EXPECT_TRUE(cli::same_bytes(d / "g1.fa", d / "g2.fa"));
    const auto recs = capd::io::parse_fasta(capd::io::read_text(d / "g1.fa"));
    EXPECT_EQ(recs[0].header.rfind("gen_0 mutations=", 0), 0u) << recs[0].header;
    EXPECT_NE(recs[0].header.find(" len=" + std::to_string(recs[0].sequence.size())), std::string::npos);

    // A training set containing every output leaves nothing, which is not an error.
    std::string all;
    for (const auto& r : recs) all += r.sequence + "\n";
    capd::io::write_atomic(d / "cover.txt", all);
    EXPECT_EQ(cli::run("--seed 4 " + gen + " --train " + (d / "cover.txt").string() + " --out " + (d / "g3.fa").string()), 0);
    EXPECT_EQ(fasta_records(d / "g3.fa"), 0u);
}

TEST(Cli, ScreenMatchesGoldens) {
    for (const std::string mode : {"library-internal", "control-calibrated"}) {
        const auto out = cli::scratch("screen_" + mode);
        ASSERT_EQ(cli::run(cli::screen_args(mode, out)), 0) << mode;
        for (const char* f : cli::kScreenOutputs)
            EXPECT_TRUE(cli::same_bytes(out / f, cli::kData / "screen" / "golden" / mode / f)) << mode << " " << f;
    }
}

TEST(Cli, ScreenReportConservesCounts) {
    const auto out = cli::scratch("screen_report");
    ASSERT_EQ(cli::run(cli::screen_args("library-internal", out)), 0);
    const auto rep = nlohmann::json::parse(capd::io::read_text(out / "filter_report.json"));
    for (const std::string lib : {"plasmid", "viral"}) {
        std::size_t removed = 0;
        for (const auto& st : rep["stages"])
            if (st["library"] == lib) removed += st["removed"].get<std::size_t>();
        EXPECT_EQ(removed + rep["retained"][lib].get<std::size_t>(), rep["input"][lib].get<std::size_t>()) << lib;
    }
}

TEST(Cli, ScreenRejectsEmptyViralTable) {
    const auto d = cli::scratch("empty_viral");
    capd::io::write_atomic(d / "viral.tsv", "sequence\tfwd\trev\n");
    const auto s = cli::kData / "screen";
    EXPECT_EQ(cli::run("screen --plasmid " + (s / "plasmid.tsv").string() + " --viral " + (d / "viral.tsv").string() +
                       " --region " + (s / "region.json").string() + " --out-dir " + (d / "out").string()),
              3);
    EXPECT_EQ(cli::run("screen --plasmid " + (s / "plasmid.tsv").string() + " --viral " + (s / "viral.tsv").string() +
                       " --region " + (s / "region.json").string() + " --mode control-calibrated --out-dir " +
                       (d / "out").string()),
              2);
}

TEST(Cli, FixtureIsReproducible) {
    const auto f = fixture::make_screen_fixture();
    const auto s = cli::kData / "screen";
    EXPECT_EQ(f.plasmid_tsv, capd::io::read_text(s / "plasmid.tsv"));
    EXPECT_EQ(f.viral_tsv, capd::io::read_text(s / "viral.tsv"));
    EXPECT_EQ(f.control_csv, capd::io::read_text(s / "control.csv"));
    EXPECT_EQ(f.truth_csv, capd::io::read_text(s / "truth.csv"));
}

TEST(Cli, LibraryCounts) {
    const auto d = cli::scratch("library");
    capd::io::write_atomic(d / "r.json", R"({"wt_region": "ACDEFGHIKL", "start": 448, "end": 457})");
    ASSERT_EQ(cli::run("library --region " + (d / "r.json").string() + " --out " + (d / "lib.csv").string()), 0);
    std::istringstream in(capd::io::read_text(d / "lib.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "sequence,kind,position,residue");
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 19u * 10 + 10 + 20 * 9 + 1);
    capd::io::write_atomic(d / "bad.json", R"({"wt_region": "ACD", "start": 1, "end": 5})");
    EXPECT_EQ(cli::run("library --region " + (d / "bad.json").string() + " --out " + (d / "x.csv").string()), 2);
}

TEST(Cli, AnalyzeWritesHistogramsAndCurve) {
    const auto d = cli::scratch("analyze");
    capd::io::write_atomic(d / "s.txt", "ACDE\nACWWDE\nACE\nWACDEY\nAKDE\n");
    ASSERT_EQ(cli::run("analyze --sequences " + (d / "s.txt").string() + " --wt ACDE --radii 0,1,2 --out-dir " +
                       (d / "out").string()),
              0);
    EXPECT_EQ(capd::io::read_text(d / "out" / "length_histogram.csv"), "length,count\n3,1\n4,2\n6,2\n");
    EXPECT_EQ(capd::io::read_text(d / "out" / "mutation_histogram.csv"), "mutations,count\n0,1\n1,2\n2,2\n");
    EXPECT_EQ(capd::io::read_text(d / "out" / "insertion_run_histogram.csv"), "run_length,count\n1,2\n2,1\n");
    EXPECT_EQ(capd::io::read_text(d / "out" / "cluster_curve.csv"), "radius,cluster_count\n0,5\n1,3\n2,1\n");
}

TEST(Cli, TransferSplicesIntoTarget) {
    const auto d = cli::scratch("transfer");
    capd::io::write_atomic(d / "src.json", R"({"wt_region": "ACD", "start": 4, "end": 6})");
    capd::io::write_atomic(d / "dst.json", R"({"wt_region": "KLM", "start": 3, "end": 5, "full_wt": "QQKLMQQ"})");
    capd::io::write_atomic(d / "gen.txt", "AWD\n");
    ASSERT_EQ(cli::run("transfer --source " + (d / "src.json").string() + " --target " + (d / "dst.json").string() +
                       " --sequences " + (d / "gen.txt").string() + " --out " + (d / "out.fa").string()),
              0);
    EXPECT_EQ(capd::io::read_text(d / "out.fa"), ">transfer_0 mutations_vs_target=3 mutations_vs_source=1\nQQAWDQQ\n");
}
