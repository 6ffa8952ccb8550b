#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "capd/error.hpp"
#include "capd/screen/analytics.hpp"
#include "capd/screen/counts.hpp"
#include "capd/screen/filters.hpp"
#include "capd/screen/gmm.hpp"
#include "capd/screen/score.hpp"
#include "capd/screen/viability.hpp"
#include "capd/seqcore/region.hpp"

namespace capd::screen {

/// control_calibrated fits the mixture on an external labeled control set;
/// library_internal fits it on the library's own single mutants.
enum class ThresholdMode { control_calibrated, library_internal };

inline ThresholdMode parse_threshold_mode(const std::string& s) {
    if (s == "control-calibrated" || s == "control_calibrated") return ThresholdMode::control_calibrated;
    if (s == "library-internal" || s == "library_internal") return ThresholdMode::library_internal;
    throw ConfigError("unknown screen mode '" + s + "' (expected control-calibrated or library-internal)");
}

inline std::string to_string(ThresholdMode m) {
    return m == ThresholdMode::control_calibrated ? "control-calibrated" : "library-internal";
}

struct ScreenConfig {
    CascadeConfig cascade;
    EmConfig em;
    ScoreScale scale = ScoreScale::log2_fitness;
    ThresholdMode mode = ThresholdMode::library_internal;

    static ScreenConfig from_json(const nlohmann::json& j) {
        ScreenConfig c;
        if (j.contains("filters")) c.cascade = CascadeConfig::from_json(j.at("filters"));
        if (j.contains("em")) c.em = EmConfig::from_json(j.at("em"));
        try {
            if (j.contains("scale")) c.scale = parse_score_scale(j.at("scale").get<std::string>());
            if (j.contains("mode")) c.mode = parse_threshold_mode(j.at("mode").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("screen config: ") + e.what());
        }
        return c;
    }
};

struct ScreenInputs {
    VariantCountTable plasmid;
    VariantCountTable viral;
    std::string wt;
    std::optional<std::unordered_set<std::string>> design;
    std::optional<std::vector<seq::LibraryVariant>> library;  // enables the heatmap
    std::optional<std::vector<ControlSample>> control;
};

struct ScreenResult {
    CascadeResult cascade;
    ScoreSummary summary;
    std::vector<ScoreRecord> records;
    GaussianMixture2 mixture;
    std::vector<ViabilityRow> viability;
    std::optional<std::vector<HeatmapCell>> heatmap;
    nlohmann::json report;
};

inline ScreenResult run_screen(const ScreenInputs& in, const ScreenConfig& cfg) {
    ScreenResult r;
    r.cascade = run_cascade(in.plasmid, in.viral, in.design ? &*in.design : nullptr, cfg.cascade);
    r.records = score(r.cascade.plasmid, r.cascade.viral, in.wt, &r.summary);

    std::vector<double> fit_values;
    std::optional<double> control_agreement;
    std::size_t labeled = 0;
    if (cfg.mode == ThresholdMode::control_calibrated) {
        if (!in.control) throw ConfigError("control-calibrated mode needs a control set");
        for (const auto& c : *in.control) fit_values.push_back(c.value);
        r.mixture = fit_gmm2(fit_values, cfg.em);
        std::size_t agree = 0;
        for (const auto& c : *in.control) {
            if (c.label < 0) continue;
            ++labeled;
            agree += ((std::isfinite(c.value) && c.value >= r.mixture.threshold) ? 1 : 0) == c.label;
        }
        if (labeled) control_agreement = static_cast<double>(agree) / static_cast<double>(labeled);
    } else {
        for (const auto& rec : r.records)
            if (rec.mutation_count == 1) fit_values.push_back(scale_value(rec, cfg.scale));
        r.mixture = fit_gmm2(fit_values, cfg.em);
    }
    call_viability(r.records, r.mixture, cfg.scale);
    r.viability = viability_by_mutation_count(r.records);
    if (in.library) r.heatmap = fitness_heatmap(*in.library, r.records);

    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : r.cascade.stages) {
        nlohmann::json j = {{"stage", s.stage}, {"library", s.library}, {"input", s.input}, {"removed", s.removed}};
        j["threshold"] = s.threshold ? nlohmann::json(*s.threshold) : nlohmann::json(nullptr);
        stages.push_back(j);
    }
    std::size_t viable = 0;
    for (const auto& rec : r.records) viable += rec.viable;
    auto& rep = r.report;
    rep["mode"] = to_string(cfg.mode);
    rep["scale"] = to_string(cfg.scale);
    rep["input"] = {{"plasmid", in.plasmid.size()}, {"viral", in.viral.size()}};
    rep["stages"] = stages;
    rep["retained"] = {{"plasmid", r.cascade.plasmid.size()}, {"viral", r.cascade.viral.size()}};
    rep["thresholds"] = {{"min_ratio", cfg.cascade.min_ratio},
                         {"viral_percentile", cfg.cascade.viral_percentile},
                         {"viral_percentile_count", r.cascade.thresholds.viral_percentile_count},
                         {"plasmid_retain", cfg.cascade.plasmid_retain},
                         {"plasmid_floor", r.cascade.thresholds.plasmid_floor}};
    rep["universe"] = {{"size", r.summary.universe},
                       {"viral_absent", r.summary.viral_absent},
                       {"viral_outside_universe", r.summary.viral_outside_universe}};
    rep["mixture"] = to_json(r.mixture);
    rep["mixture"]["fit_values"] = fit_values.size();
    rep["viability_threshold"] = r.mixture.threshold;
    rep["viability_threshold_enrichment"] = enrichment_threshold(r.mixture.threshold, cfg.scale);
    rep["viable"] = viable;
    if (control_agreement) {
        rep["control"] = {{"labeled", labeled}, {"agreement", *control_agreement}};
    }
    return r;
}

}  // namespace capd::screen
