// capd: training, sampling, library design and screening analysis.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "capd/denoiser/serialize.hpp"
#include "capd/denoiser/train.hpp"
#include "capd/diffusion/schedule.hpp"
#include "capd/error.hpp"
#include "capd/generator/sampler.hpp"
#include "capd/io.hpp"
#include "capd/screen/pipeline.hpp"
#include "capd/seqcore/edit.hpp"
#include "capd/seqcore/region.hpp"

namespace fs = std::filesystem;
using capd::ConfigError;
using capd::DataError;
using nlohmann::json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string config_path;
    json config = json::object();

    std::uint64_t seed_or(std::uint64_t fallback) const { return seed ? *seed : fallback; }

    json section(const char* name) const {
        if (!config.contains(name)) return json::object();
        const auto& s = config.at(name);
        if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
        return s;
    }
};

void setup_logging() {
    auto logger = spdlog::stderr_logger_st("capd");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("CAPD_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
    try {
        json j = json::parse(capd::io::read_text(path));
        if (!j.is_object()) throw ConfigError("config must be a JSON object: " + path);
        return j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config is not valid JSON (" + path + "): " + e.what());
    }
}

json load_json_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " file not found: " + path);
    try {
        return json::parse(capd::io::read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(what) + " is not valid JSON (" + path + "): " + e.what());
    }
}

/// A path to a FASTA/list file (first record used) or a literal sequence.
std::string sequence_argument(const std::string& arg, const char* what) {
    if (fs::is_regular_file(arg)) {
        const auto seqs = capd::io::read_sequences(arg);
        if (seqs.empty()) throw DataError(std::string(what) + " file has no sequence: " + arg);
        return seqs.front();
    }
    capd::seq::check_residues(arg, capd::seq::Alphabet::protein());
    return arg;
}

/// Sequences from FASTA, a plain list, or a CSV whose header starts with `sequence`.
std::vector<std::string> sequence_file(const std::string& path) {
    const std::string text = capd::io::read_text(path);
    if (text.rfind("sequence,", 0) == 0 || text.rfind("sequence\n", 0) == 0) {
        std::vector<std::string> out;
        std::istringstream in(text);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            line = capd::io::trim(line);
            if (line.empty()) continue;
            out.push_back(line.substr(0, line.find(',')));
        }
        return out;
    }
    return capd::io::read_sequences(path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

capd::diffusion::ScheduleConfig schedule_config(const json& section, std::size_t model_steps) {
    auto cfg = capd::diffusion::ScheduleConfig::from_json(section);
    if (!section.contains("T")) cfg.steps = model_steps;
    if (cfg.steps != model_steps)
        throw ConfigError("schedule T (" + std::to_string(cfg.steps) + ") differs from model T (" +
                          std::to_string(model_steps) + ")");
    return cfg;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
    std::string data, out, log;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
    const auto model_cfg = capd::denoiser::DenoiserConfig::from_json(g.section("model"));
    const auto sched_cfg = schedule_config(g.section("schedule"), model_cfg.steps);
    auto train_cfg = capd::denoiser::TrainConfig::from_json(g.section("train"));
    train_cfg.seed = g.seed_or(train_cfg.seed);
    train_cfg.threads = g.threads;
    const auto schedule = capd::diffusion::build_schedule(model_cfg.vocab_in(), sched_cfg);

    const auto data = capd::io::read_sequences(a.data);
    if (data.empty()) throw DataError("training data is empty: " + a.data);
    spdlog::info("training on {} sequences, {} parameters", data.size(), model_cfg.parameter_count());

    capd::denoiser::DenoiserModel<float> model(model_cfg);
    model.initialize(capd::Rng::splitmix64(train_cfg.seed ^ 0x6d6f64656cULL));
    capd::denoiser::Trainer<float> trainer(model, schedule, train_cfg);
    std::string log = "step,loss,lr\n";
    const std::size_t total = trainer.total_steps(data.size());
    trainer.fit(data, [&](const capd::denoiser::StepStats& st) {
        log += std::to_string(st.step) + ',' + capd::io::fmt_real(st.loss) + ',' + capd::io::fmt_real(st.learning_rate) + '\n';
        if (st.step == 1 || st.step % 100 == 0 || st.step == total)
            spdlog::debug("step {}/{} loss {:.4f} lr {:.3g}", st.step, total, st.loss, st.learning_rate);
    });
    capd::denoiser::save_model(model, a.out, sched_cfg.to_json());
    const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
    capd::io::write_atomic(log_path, log);
    spdlog::info("wrote {} and {}", a.out, log_path);
    return 0;
}

// generate -------------------------------------------------------------------

struct GenerateArgs {
    std::string model, out, wt, train;
    std::size_t n = 0;
};

int cmd_generate(const Globals& g, const GenerateArgs& a) {
    const std::string bytes = capd::io::read_text(a.model);
    const auto model = capd::denoiser::deserialize_model<float>(bytes);
    json sched_json = capd::denoiser::read_model_schedule(bytes);
    if (sched_json.is_null()) sched_json = json::object();
    const auto sched_cfg = schedule_config(sched_json, model.config().steps);
    const auto schedule = capd::diffusion::build_schedule(model.config().vocab_in(), sched_cfg);
    const std::string wt = sequence_argument(a.wt, "wild type");

    capd::gen::SampleOptions opts;
    opts.threads = g.threads;
    const json gen_cfg = g.section("generate");
    if (gen_cfg.contains("max_retries")) opts.max_retries = gen_cfg.at("max_retries").get<std::size_t>();
    const auto sampled = capd::gen::sample(model, schedule, a.n, g.seed_or(0), opts);

    std::unordered_set<std::string> train;
    if (!a.train.empty())
        for (auto& s : capd::io::read_sequences(a.train)) train.insert(std::move(s));
    const auto kept = capd::gen::postprocess(sampled.sequences, train);
    spdlog::info("sampled {}: {} empty dropped, {} duplicates, {} in training set, {} written", a.n,
                 sampled.dropped_empty, kept.duplicates_removed, kept.training_overlap_removed, kept.sequences.size());
    if (kept.sequences.empty()) spdlog::warn("no sequences left after postprocessing; writing an empty FASTA");

    std::vector<capd::io::FastaRecord> records;
    for (std::size_t i = 0; i < kept.sequences.size(); ++i) {
        const auto& s = kept.sequences[i];
        records.push_back({"gen_" + std::to_string(i) + " mutations=" + std::to_string(capd::seq::edit_distance(s, wt)) +
                               " len=" + std::to_string(s.size()),
                           s});
    }
    capd::io::write_atomic(a.out, capd::io::format_fasta(records));
    return 0;
}

// transfer -------------------------------------------------------------------

struct TransferArgs {
    std::string source, target, sequences, out;
};

int cmd_transfer(const Globals&, const TransferArgs& a) {
    const auto source = capd::seq::RegionSpec::from_json(load_json_file(a.source, "source region"));
    const auto target = capd::seq::RegionSpec::from_json(load_json_file(a.target, "target region"));
    if (!target.full_wt) throw ConfigError("target region needs full_wt");
    std::vector<capd::io::FastaRecord> records;
    std::size_t i = 0;
    for (const auto& s : capd::io::read_sequences(a.sequences)) {
        capd::seq::check_residues(s, capd::seq::Alphabet::protein());
        const auto r = capd::seq::transfer_region(s, source, target);
        records.push_back({"transfer_" + std::to_string(i++) + " mutations_vs_target=" +
                               std::to_string(r.mutations_vs_target) +
                               " mutations_vs_source=" + std::to_string(r.mutations_vs_source),
                           r.full_sequence});
    }
    capd::io::write_atomic(a.out, capd::io::format_fasta(records));
    return 0;
}

// library --------------------------------------------------------------------

struct LibraryArgs {
    std::string region, out;
    bool no_insertions = false, no_deletions = false;
    std::size_t sampled_insertions = 0;
};

std::string format_library(const std::vector<capd::seq::LibraryVariant>& lib) {
    std::string out = "sequence,kind,position,residue\n";
    for (const auto& v : lib) {
        out += v.sequence + ',' + capd::seq::to_string(v.kind) + ',' +
               (v.kind == capd::seq::VariantKind::wild_type ? std::string() : capd::screen::format_position(v.position)) +
               ',' + (v.new_residue ? std::string(1, v.new_residue) : std::string()) + '\n';
    }
    return out;
}

int cmd_library(const Globals& g, const LibraryArgs& a) {
    const auto region = capd::seq::RegionSpec::from_json(load_json_file(a.region, "region"));
    std::vector<capd::seq::LibraryVariant> lib;
    if (a.sampled_insertions > 0 && !a.no_insertions) {
        capd::Rng rng(g.seed_or(0));
        lib = capd::seq::saturation_library_sampled_insertions(region, a.sampled_insertions, !a.no_deletions, rng);
    } else {
        lib = capd::seq::saturation_library(region, !a.no_insertions, !a.no_deletions);
    }
    capd::io::write_atomic(a.out, format_library(lib));
    spdlog::info("{} library members for a {}-residue region", lib.size(), region.length());
    return 0;
}

// screen ---------------------------------------------------------------------

struct ScreenArgs {
    std::string plasmid, viral, design, region, wt, mode, control, out_dir;
};

int cmd_screen(const Globals& g, const ScreenArgs& a) {
    auto cfg = capd::screen::ScreenConfig::from_json(g.section("screen"));
    if (!a.mode.empty()) cfg.mode = capd::screen::parse_threshold_mode(a.mode);
    if (g.seed) cfg.em.seed = *g.seed;

    capd::screen::ScreenInputs in;
    in.plasmid = capd::screen::ingest_counts(a.plasmid, capd::screen::LibraryKind::plasmid);
    in.viral = capd::screen::ingest_counts(a.viral, capd::screen::LibraryKind::viral);
    std::optional<capd::seq::RegionSpec> region;
    if (!a.region.empty()) {
        region = capd::seq::RegionSpec::from_json(load_json_file(a.region, "region"));
        in.library = capd::seq::saturation_library(*region);
        in.design.emplace();
        for (const auto& v : *in.library) in.design->insert(v.sequence);
    }
    if (!a.design.empty()) {
        const auto seqs = sequence_file(a.design);
        if (!in.design) in.design.emplace();
        in.design->insert(seqs.begin(), seqs.end());
    }
    if (!a.wt.empty())
        in.wt = sequence_argument(a.wt, "wild type");
    else if (region)
        in.wt = region->wt_region;
    else
        throw ConfigError("screen needs --wt or --region");
    if (cfg.mode == capd::screen::ThresholdMode::control_calibrated) {
        if (a.control.empty()) throw ConfigError("control-calibrated mode needs --control");
        in.control = capd::screen::read_control_csv(capd::io::read_text(a.control), cfg.scale,
                                                    fs::path(a.control).filename().string());
    }

    const auto r = capd::screen::run_screen(in, cfg);
    ensure_dir(a.out_dir);
    const fs::path dir(a.out_dir);
    capd::io::write_atomic(dir / "scores.csv", capd::screen::format_scores(r.records));
    capd::io::write_atomic(dir / "filter_report.json", r.report.dump(2) + "\n");
    capd::io::write_atomic(dir / "viability_by_mutation_count.csv", capd::screen::format_viability(r.viability));
    if (r.heatmap) capd::io::write_atomic(dir / "heatmap.csv", capd::screen::format_heatmap(*r.heatmap));
    spdlog::info("{} variants scored, {} viable, threshold {:.4f} ({})", r.records.size(),
                 r.report["viable"].get<std::size_t>(), r.mixture.threshold, capd::screen::to_string(cfg.scale));
    return 0;
}

// analyze --------------------------------------------------------------------

struct AnalyzeArgs {
    std::string sequences, wt, out_dir, metric;
    std::vector<std::size_t> radii;
};

int cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
    const json section = g.section("analyze");
    std::vector<std::size_t> radii = a.radii;
    if (radii.empty() && section.contains("radii")) radii = section.at("radii").get<std::vector<std::size_t>>();
    if (radii.empty()) radii = {0, 1, 2, 3, 4, 5, 6};
    std::string metric = a.metric;
    if (metric.empty()) metric = section.value("metric", std::string("edit"));

    const auto seqs = capd::io::read_sequences(a.sequences);
    for (const auto& s : seqs) capd::seq::check_residues(s, capd::seq::Alphabet::protein());
    const std::string wt = sequence_argument(a.wt, "wild type");
    const auto d = capd::screen::distributions(seqs, wt);
    const auto curve = capd::screen::cluster_curve(seqs, radii, capd::screen::parse_cluster_metric(metric), wt);

    ensure_dir(a.out_dir);
    const fs::path dir(a.out_dir);
    capd::io::write_atomic(dir / "length_histogram.csv", capd::screen::format_histogram(d.lengths, "length"));
    capd::io::write_atomic(dir / "mutation_histogram.csv", capd::screen::format_histogram(d.mutation_counts, "mutations"));
    capd::io::write_atomic(dir / "insertion_run_histogram.csv", capd::screen::format_histogram(d.insertion_runs, "run_length"));
    capd::io::write_atomic(dir / "cluster_curve.csv", capd::screen::format_cluster_curve(radii, curve));
    return 0;
}

// schedule -------------------------------------------------------------------

struct ScheduleArgs {
    std::string out;
};

int cmd_schedule(const Globals& g, const ScheduleArgs& a) {
    const auto model_cfg = capd::denoiser::DenoiserConfig::from_json(g.section("model"));
    const auto sched_cfg = schedule_config(g.section("schedule"), model_cfg.steps);
    const auto s = capd::diffusion::build_schedule(model_cfg.vocab_in(), sched_cfg);
    std::string out = "t,alpha,beta,gamma,cumulative_absorb\n";
    const auto absorb = static_cast<Eigen::Index>(s.absorb_state());
    for (std::size_t t = 1; t <= s.steps(); ++t)
        out += std::to_string(t) + ',' + capd::io::fmt_real(s.alpha(t)) + ',' + capd::io::fmt_real(s.beta(t)) + ',' +
               capd::io::fmt_real(s.gamma(t)) + ',' + capd::io::fmt_real(s.cumulative(t)(absorb, 0)) + '\n';
    if (a.out.empty() || a.out == "-")
        std::cout << out;
    else
        capd::io::write_atomic(a.out, out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Capsid sequence diffusion: train, generate, design and screen"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Master random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--config", g.config_path, "JSON configuration file");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Fit the denoiser to a sequence set");
    train->add_option("--data", ta.data, "Training sequences (FASTA or one per line)")->required();
    train->add_option("--out", ta.out, "Model file to write")->required();
    train->add_option("--log", ta.log, "Training log CSV (default: <out>.log.csv)");

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "Sample sequences from a trained model");
    generate->add_option("--model", ga.model, "Model file")->required();
    generate->add_option("-n,--num", ga.n, "Number of samples to draw")->required();
    generate->add_option("--out", ga.out, "FASTA output")->required();
    generate->add_option("--wt", ga.wt, "Wild-type sequence or file, for mutation counts")->required();
    generate->add_option("--train", ga.train, "Training set; matching samples are removed");

    TransferArgs tra;
    auto* transfer = app.add_subcommand("transfer", "Splice generated regions into another serotype");
    transfer->add_option("--source", tra.source, "Source region JSON")->required();
    transfer->add_option("--target", tra.target, "Target region JSON (with full_wt)")->required();
    transfer->add_option("--sequences", tra.sequences, "Generated region sequences")->required();
    transfer->add_option("--out", tra.out, "FASTA output")->required();

    LibraryArgs la;
    auto* library = app.add_subcommand("library", "Build a saturation mutagenesis library for a region");
    library->add_option("--region", la.region, "Region JSON")->required();
    library->add_option("--out", la.out, "CSV output")->required();
    library->add_flag("--no-insertions", la.no_insertions, "Omit insertions");
    library->add_flag("--no-deletions", la.no_deletions, "Omit deletions");
    library->add_option("--sampled-insertions", la.sampled_insertions, "Random residues per insertion gap (0 = all 20)");

    ScreenArgs sa;
    auto* screen = app.add_subcommand("screen", "Filter, score and threshold a library screen");
    screen->add_option("--plasmid", sa.plasmid, "Plasmid count TSV")->required();
    screen->add_option("--viral", sa.viral, "Viral count TSV")->required();
    screen->add_option("--design", sa.design, "Designed sequences (FASTA, list or library CSV)");
    screen->add_option("--region", sa.region, "Region JSON; designs its saturation library and enables the heatmap");
    screen->add_option("--wt", sa.wt, "Wild-type region sequence or file");
    screen->add_option("--mode", sa.mode, "control-calibrated | library-internal");
    screen->add_option("--control", sa.control, "Labeled control CSV for control-calibrated mode");
    screen->add_option("--out-dir", sa.out_dir, "Output directory")->required();

    AnalyzeArgs aa;
    auto* analyze = app.add_subcommand("analyze", "Length, mutation and insertion histograms plus cluster curve");
    analyze->add_option("--sequences", aa.sequences, "Sequences (FASTA or one per line)")->required();
    analyze->add_option("--wt", aa.wt, "Wild-type sequence or file")->required();
    analyze->add_option("--radii", aa.radii, "Cluster radii")->delimiter(',');
    analyze->add_option("--metric", aa.metric, "edit | mutation_count");
    analyze->add_option("--out-dir", aa.out_dir, "Output directory")->required();

    ScheduleArgs sca;
    auto* schedule = app.add_subcommand("schedule", "Print the noise schedule as CSV");
    schedule->add_option("--out", sca.out, "CSV output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (*seed_opt) g.seed = seed;

    try {
        g.config = load_config(g.config_path);
        if (*train) return cmd_train(g, ta);
        if (*generate) return cmd_generate(g, ga);
        if (*transfer) return cmd_transfer(g, tra);
        if (*library) return cmd_library(g, la);
        if (*screen) return cmd_screen(g, sa);
        if (*analyze) return cmd_analyze(g, aa);
        if (*schedule) return cmd_schedule(g, sca);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const json::exception& e) {
        spdlog::error("config: {}", e.what());
        return 2;
    } catch (const DataError& e) {
        spdlog::error("{}", e.what());
        return 3;
    } catch (const capd::NumericError& e) {
        spdlog::error("{}", e.what());
        return 4;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
