#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "capd/error.hpp"
#include "capd/rng.hpp"

namespace capd::screen {

struct EmConfig {
    double tol = 1e-8;  // on the total log-likelihood
    std::size_t max_iter = 500;
    std::size_t restarts = 5;
    std::uint64_t seed = 0;

    static EmConfig from_json(const nlohmann::json& j) {
        EmConfig c;
        try {
            if (j.contains("tol")) c.tol = j.at("tol").get<double>();
            if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<std::size_t>();
            if (j.contains("restarts")) c.restarts = j.at("restarts").get<std::size_t>();
            if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("em config: ") + e.what());
        }
        if (c.restarts < 1 || c.max_iter < 1) throw ConfigError("em config: restarts and max_iter must be >= 1");
        return c;
    }
};

struct GaussianMixture2 {
    std::array<double, 2> weights{0.5, 0.5};
    std::array<double, 2> means{0.0, 0.0};  // ascending
    std::array<double, 2> stddevs{1.0, 1.0};
    double threshold = 0.0;
    double log_likelihood = 0.0;
    std::size_t iterations = 0;
    bool intersection_found = true;
    std::vector<std::vector<double>> traces;  // log-likelihood per iteration, per restart

    double density(std::size_t k, double x) const {
        const double z = (x - means[k]) / stddevs[k];
        return weights[k] * std::exp(-0.5 * z * z) / (stddevs[k] * std::sqrt(2.0 * std::numbers::pi));
    }

    /// Posterior probability of the upper component.
    double upper_responsibility(double x) const {
        const double a = density(0, x), b = density(1, x);
        return b / (a + b);
    }
};

/// Point between the means where the weighted component densities cross.
/// Falls back to the stddev-weighted midpoint when no crossing lies there.
inline double mixture_threshold(const GaussianMixture2& g, bool* found = nullptr) {
    const double w1 = g.weights[0], m1 = g.means[0], s1 = g.stddevs[0];
    const double w2 = g.weights[1], m2 = g.means[1], s2 = g.stddevs[1];
    const double a = 1.0 / (2 * s1 * s1) - 1.0 / (2 * s2 * s2);
    const double b = m2 / (s2 * s2) - m1 / (s1 * s1);
    const double c = m1 * m1 / (2 * s1 * s1) - m2 * m2 / (2 * s2 * s2) - std::log((w1 * s2) / (w2 * s1));
    // a x^2 + b x + c = 0 is log(w1 N1) - log(w2 N2) = 0 rearranged.
    std::vector<double> roots;
    if (std::abs(a) < 1e-14 * (std::abs(b) + std::abs(c) + 1.0)) {
        if (b != 0.0) roots.push_back(-c / b);
    } else {
        const double disc = b * b - 4 * a * c;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            const double q = -0.5 * (b + std::copysign(sq, b));
            roots.push_back(q / a);
            if (q != 0.0) roots.push_back(c / q);
        }
    }
    for (double r : roots)
        if (r >= m1 && r <= m2) {
            if (found) *found = true;
            return r;
        }
    if (found) *found = false;
    return m1 + (m2 - m1) * s1 / (s1 + s2);
}

namespace detail {

struct EmRun {
    GaussianMixture2 g;
    std::vector<double> trace;
};

inline double mixture_log_likelihood(const std::vector<double>& x, const GaussianMixture2& g) {
    double ll = 0.0;
    for (double v : x) ll += std::log(g.density(0, v) + g.density(1, v));
    return ll;
}

inline EmRun em_from(const std::vector<double>& x, double c0, double c1, const EmConfig& cfg, double sd_floor) {
    const std::size_t n = x.size();
    GaussianMixture2 g;
    // Initial hard assignment to the nearer center.
    std::array<double, 2> s{0, 0}, s2{0, 0}, cnt{0, 0};
    for (double v : x) {
        const std::size_t k = std::abs(v - c0) <= std::abs(v - c1) ? 0 : 1;
        cnt[k] += 1;
        s[k] += v;
        s2[k] += v * v;
    }
    for (std::size_t k = 0; k < 2; ++k) {
        if (cnt[k] == 0) {
            g.means[k] = k == 0 ? c0 : c1;
            g.stddevs[k] = sd_floor;
            g.weights[k] = 0.5 / static_cast<double>(n);
            continue;
        }
        g.means[k] = s[k] / cnt[k];
        g.stddevs[k] = std::max(sd_floor, std::sqrt(std::max(0.0, s2[k] / cnt[k] - g.means[k] * g.means[k])));
        g.weights[k] = cnt[k] / static_cast<double>(n);
    }
    const double wsum = g.weights[0] + g.weights[1];
    g.weights[0] /= wsum;
    g.weights[1] /= wsum;

    EmRun run;
    std::vector<double> r(n);
    double ll = mixture_log_likelihood(x, g);
    run.trace.push_back(ll);
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        double n1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = g.upper_responsibility(x[i]);
            if (!std::isfinite(r[i])) r[i] = std::abs(x[i] - g.means[1]) < std::abs(x[i] - g.means[0]) ? 1.0 : 0.0;
            n1 += r[i];
        }
        const double n0 = static_cast<double>(n) - n1;
        if (n0 <= 0.0 || n1 <= 0.0) break;
        double m0 = 0, m1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            m0 += (1 - r[i]) * x[i];
            m1 += r[i] * x[i];
        }
        m0 /= n0;
        m1 /= n1;
        double v0 = 0, v1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            v0 += (1 - r[i]) * (x[i] - m0) * (x[i] - m0);
            v1 += r[i] * (x[i] - m1) * (x[i] - m1);
        }
        g.means = {m0, m1};
        g.stddevs = {std::max(sd_floor, std::sqrt(v0 / n0)), std::max(sd_floor, std::sqrt(v1 / n1))};
        g.weights = {n0 / static_cast<double>(n), n1 / static_cast<double>(n)};
        const double next = mixture_log_likelihood(x, g);
        run.trace.push_back(next);
        g.iterations = it + 1;
        const bool done = std::abs(next - ll) < cfg.tol;
        ll = next;
        if (done) break;
    }
    g.log_likelihood = ll;
    run.g = g;
    return run;
}

}  // namespace detail

/// Two-component 1-D mixture by EM, best of `restarts` k-means++ style
/// initialisations. Non-finite values are ignored.
inline GaussianMixture2 fit_gmm2(const std::vector<double>& values, const EmConfig& cfg = {}) {
    std::vector<double> x;
    x.reserve(values.size());
    for (double v : values)
        if (std::isfinite(v)) x.push_back(v);
    if (x.size() < 10) throw DataError("mixture fit needs at least 10 finite values, got " + std::to_string(x.size()));
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*lo))) throw DataError("no separable components");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd_floor = 1e-6 * std::sqrt(var / static_cast<double>(x.size()));

    Rng rng(cfg.seed);
    std::vector<detail::EmRun> runs;
    std::vector<double> d2(x.size());
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        const double c0 = x[rng.below(x.size())];
        for (std::size_t i = 0; i < x.size(); ++i) d2[i] = (x[i] - c0) * (x[i] - c0);
        const double c1 = x[rng.categorical(d2)];
        runs.push_back(detail::em_from(x, c0, c1, cfg, sd_floor));
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].g.log_likelihood > runs[best].g.log_likelihood) best = r;
    GaussianMixture2 g = runs[best].g;
    if (g.means[0] > g.means[1]) {
        std::swap(g.means[0], g.means[1]);
        std::swap(g.stddevs[0], g.stddevs[1]);
        std::swap(g.weights[0], g.weights[1]);
    }
    if (!(g.means[1] - g.means[0] > 0.0)) throw DataError("no separable components");
    for (auto& run : runs) g.traces.push_back(std::move(run.trace));
    g.threshold = mixture_threshold(g, &g.intersection_found);
    return g;
}

inline nlohmann::json to_json(const GaussianMixture2& g) {
    return {{"weights", g.weights},
            {"means", g.means},
            {"stddevs", g.stddevs},
            {"threshold", g.threshold},
            {"log_likelihood", g.log_likelihood},
            {"iterations", g.iterations},
            {"intersection_found", g.intersection_found}};
}

}  // namespace capd::screen
