#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "capd/error.hpp"

namespace capd::diffusion {

using Matrix = Eigen::MatrixXd;

enum class GammaCurve { cosine, linear, constant };

inline GammaCurve parse_gamma_curve(const std::string& s) {
    if (s == "cosine") return GammaCurve::cosine;
    if (s == "linear") return GammaCurve::linear;
    if (s == "constant") return GammaCurve::constant;
    throw ConfigError("unknown gamma_curve '" + s + "' (expected cosine, linear or constant)");
}

inline const char* to_string(GammaCurve c) {
    switch (c) {
        case GammaCurve::cosine: return "cosine";
        case GammaCurve::linear: return "linear";
        case GammaCurve::constant: return "constant";
    }
    return "?";
}

/// How the per-step rates are produced.
///
/// For the cosine and linear curves, `gamma_curve` fixes the cumulative
/// absorbed mass (sin^2(pi/2 t/T) or t/T), which reaches 1 at t = T, and the
/// uniform rate is applied to the surviving mass: beta_t = beta * (1 - gamma_t).
/// The constant curve uses beta_t = beta and gamma_t = gamma verbatim.
/// Explicit `beta_t`/`gamma_t` vectors override both.
struct ScheduleConfig {
    std::size_t steps = 100;
    double beta = -1.0;  // negative: 0.05 / K
    GammaCurve gamma_curve = GammaCurve::cosine;
    double gamma = 0.0;
    std::vector<double> beta_t;
    std::vector<double> gamma_t;

    static ScheduleConfig from_json(const nlohmann::json& j) {
        ScheduleConfig c;
        try {
            if (j.contains("T")) c.steps = j.at("T").get<std::size_t>();
            if (j.contains("beta")) c.beta = j.at("beta").get<double>();
            if (j.contains("gamma_curve")) c.gamma_curve = parse_gamma_curve(j.at("gamma_curve").get<std::string>());
            if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
            if (j.contains("beta_t")) c.beta_t = j.at("beta_t").get<std::vector<double>>();
            if (j.contains("gamma_t")) c.gamma_t = j.at("gamma_t").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("schedule config: ") + e.what());
        }
        return c;
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"T", steps}, {"beta", beta}, {"gamma_curve", to_string(gamma_curve)}, {"gamma", gamma}};
        if (!beta_t.empty()) j["beta_t"] = beta_t;
        if (!gamma_t.empty()) j["gamma_t"] = gamma_t;
        return j;
    }
};

/// Forward-chain transition matrices. `step(t)` is Q_t, with
/// [Q_t](m, n) = q(x_t = m | x_{t-1} = n); `cumulative(t)` is Q_t ... Q_1, and
/// `cumulative(0)` is the identity. The last state is absorbing.
class TransitionSchedule {
public:
    TransitionSchedule() = default;

    std::size_t steps() const { return alpha_.size(); }
    std::size_t states() const { return states_; }
    std::size_t absorb_state() const { return states_ - 1; }

    double alpha(std::size_t t) const { return alpha_.at(t - 1); }
    double beta(std::size_t t) const { return beta_.at(t - 1); }
    double gamma(std::size_t t) const { return gamma_.at(t - 1); }

    const Matrix& step(std::size_t t) const {
        check_step(t);
        return step_[t - 1];
    }
    const Matrix& cumulative(std::size_t t) const {
        if (t > steps()) throw DataError("timestep " + std::to_string(t) + " out of range");
        return cumulative_[t];
    }

    void check_step(std::size_t t) const {
        if (t < 1 || t > steps())
            throw DataError("timestep " + std::to_string(t) + " out of range [1, " + std::to_string(steps()) + "]");
    }

    /// Builds the chain from explicit per-step rates.
    static TransitionSchedule from_rates(std::size_t states, std::vector<double> beta, std::vector<double> gamma) {
        if (states < 3) throw ConfigError("schedule needs at least 3 states");
        if (beta.empty() || beta.size() != gamma.size()) throw ConfigError("schedule: rate vectors must match T >= 1");
        TransitionSchedule s;
        s.states_ = states;
        const std::size_t T = beta.size();
        const std::size_t K = states;
        const std::size_t A = K - 1;
        s.alpha_.resize(T);
        Matrix bar = Matrix::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
        s.cumulative_.push_back(bar);
        for (std::size_t t = 0; t < T; ++t) {
            const double b = beta[t], g = gamma[t];
            double a = 1.0 - static_cast<double>(K - 1) * b - g;
            if (b < 0.0 || g < 0.0 || g > 1.0 || a < -1e-12)
                throw ConfigError("infeasible schedule at t=" + std::to_string(t + 1) + " (alpha=" +
                                  std::to_string(a) + ", beta=" + std::to_string(b) + ", gamma=" +
                                  std::to_string(g) + ")");
            if (a < 0.0) a = 0.0;
            s.alpha_[t] = a;
            Matrix q = Matrix::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
            for (std::size_t n = 0; n < A; ++n) {
                for (std::size_t m = 0; m < A; ++m) q(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = b;
                q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = a + b;
                q(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(n)) = g;
            }
            q(static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(A)) = 1.0;
            bar = q * bar;
            s.step_.push_back(std::move(q));
            s.cumulative_.push_back(bar);
        }
        s.beta_ = std::move(beta);
        s.gamma_ = std::move(gamma);
        return s;
    }

private:
    std::size_t states_ = 0;
    std::vector<double> alpha_, beta_, gamma_;
    std::vector<Matrix> step_;
    std::vector<Matrix> cumulative_;
};

inline double default_beta(std::size_t states) { return 0.05 / static_cast<double>(states); }

/// Cumulative absorbed mass after t of T steps.
inline double cumulative_absorption(GammaCurve curve, std::size_t t, std::size_t T) {
    const double x = static_cast<double>(t) / static_cast<double>(T);
    switch (curve) {
        case GammaCurve::cosine: {
            const double c = std::cos(std::numbers::pi / 2.0 * x);
            return t == T ? 1.0 : 1.0 - c * c;
        }
        case GammaCurve::linear: return x;
        case GammaCurve::constant: break;
    }
    throw ConfigError("constant gamma curve has no cumulative form");
}

inline TransitionSchedule build_schedule(std::size_t states, const ScheduleConfig& cfg) {
    if (!cfg.beta_t.empty() || !cfg.gamma_t.empty()) {
        if (cfg.beta_t.size() != cfg.steps || cfg.gamma_t.size() != cfg.steps)
            throw ConfigError("schedule: beta_t and gamma_t must both have T entries");
        return TransitionSchedule::from_rates(states, cfg.beta_t, cfg.gamma_t);
    }
    const std::size_t T = cfg.steps;
    if (T < 1) throw ConfigError("schedule: T must be >= 1");
    const double beta = cfg.beta < 0.0 ? default_beta(states) : cfg.beta;
    std::vector<double> b(T), g(T);
    for (std::size_t t = 1; t <= T; ++t) {
        if (cfg.gamma_curve == GammaCurve::constant) {
            g[t - 1] = cfg.gamma;
            b[t - 1] = beta;
            continue;
        }
        const double prev = cumulative_absorption(cfg.gamma_curve, t - 1, T);
        const double cur = cumulative_absorption(cfg.gamma_curve, t, T);
        const double gt = prev >= 1.0 ? 1.0 : std::clamp((cur - prev) / (1.0 - prev), 0.0, 1.0);
        g[t - 1] = gt;
        b[t - 1] = beta * (1.0 - gt);
    }
    return TransitionSchedule::from_rates(states, std::move(b), std::move(g));
}

inline TransitionSchedule build_schedule(std::size_t steps, std::size_t states, ScheduleConfig cfg) {
    cfg.steps = steps;
    return build_schedule(states, cfg);
}

/// Total-variation distance of each column of Q̄_T from the absorbing one-hot.
inline std::vector<double> absorption_gap(const TransitionSchedule& s) {
    const Matrix& bar = s.cumulative(s.steps());
    std::vector<double> tv(s.states());
    for (Eigen::Index n = 0; n < bar.cols(); ++n) {
        double d = 0.0;
        for (Eigen::Index m = 0; m < bar.rows(); ++m) {
            const double target = m == bar.rows() - 1 ? 1.0 : 0.0;
            d += std::abs(bar(m, n) - target);
        }
        tv[static_cast<std::size_t>(n)] = 0.5 * d;
    }
    return tv;
}

}  // namespace capd::diffusion
