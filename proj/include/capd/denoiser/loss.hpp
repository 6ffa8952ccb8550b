#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "capd/denoiser/model.hpp"
#include "capd/diffusion/kernels.hpp"
#include "capd/diffusion/schedule.hpp"
#include "capd/rng.hpp"
#include "capd/seqcore/sequence.hpp"

namespace capd::denoiser {

/// One term of the variational bound for a fixed (t, x_t).
struct ElboTerm {
    std::size_t t = 0;
    bool reconstruction = false;  // true for the -log p(x0 | x1) term
    double value = 0.0;           // summed over positions
    std::vector<double> per_position;
};

struct LossSample {
    double estimate = 0.0;  // T * term.value, unbiased for the full bound
    ElboTerm term;
    seq::TokenSequence xt;
};

namespace detail {

inline void check_compatible(const DenoiserConfig& cfg, const diffusion::TransitionSchedule& s) {
    if (cfg.steps != s.steps() || cfg.vocab_in() != s.states())
        throw ConfigError("model and schedule disagree on T or state count");
}

}  // namespace detail

/// L_{t-1} = KL(q(x_{t-1} | x_t, x0) || p(x_{t-1} | x_t)) for t >= 2, or
/// L_0 = -log p(x0 | x_1) for t = 1. With `grad`, adds `weight` times the
/// gradient of the term into it.
template <typename Scalar>
ElboTerm elbo_term(const DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                   const seq::TokenSequence& x0, std::size_t t, const seq::TokenSequence& xt,
                   std::vector<Scalar>* grad = nullptr, double weight = 1.0) {
    using Mat = typename DenoiserModel<Scalar>::Mat;
    detail::check_compatible(model.config(), s);
    if (x0.canvas_length() != xt.canvas_length()) throw DataError("x0 and x_t canvas lengths differ");
    const std::size_t L = x0.canvas_length();
    const std::size_t K = s.states();
    const std::size_t V = K - 1;
    for (seq::Token tok : x0.tokens)
        if (tok >= V) throw DataError("elbo: x0 must be clean");

    typename DenoiserModel<Scalar>::Cache cache;
    const Mat probs = model.forward(xt, t, grad ? &cache : nullptr);

    ElboTerm term;
    term.t = t;
    term.reconstruction = (t == 1);
    term.per_position.assign(L, 0.0);
    Mat dprobs = Mat::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(V));

    std::vector<double> p(V), mixed(K), g(K);
    for (std::size_t i = 0; i < L; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t k = 0; k < V; ++k) p[k] = static_cast<double>(probs(row, static_cast<Eigen::Index>(k)));
        if (t == 1) {
            const double px = p[x0[i]];
            term.per_position[i] = -std::log(px);
            dprobs(row, x0[i]) = static_cast<Scalar>(-weight / px);
            continue;
        }
        const diffusion::PosteriorTable tab = diffusion::posterior_table(s, xt[i], t);
        if (!tab.consistent[x0[i]]) throw DataError("inconsistent (x_t, x_0) pair");
        const double z = diffusion::mix_posteriors(tab, p.data(), mixed.data());
        const auto truth = tab.rows.row(x0[i]);
        double kl = 0.0;
        double g_dot_mixed = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            const double q = truth(static_cast<Eigen::Index>(j));
            g[j] = 0.0;
            if (q > 0.0) {
                kl += q * (std::log(q) - std::log(mixed[j]));
                g[j] = -q / mixed[j];
                g_dot_mixed += g[j] * mixed[j];
            }
        }
        term.per_position[i] = kl;
        if (!grad) continue;
        for (std::size_t k = 0; k < V; ++k) {
            if (!tab.consistent[k]) continue;
            double gk = 0.0;
            const auto post = tab.rows.row(static_cast<Eigen::Index>(k));
            for (std::size_t j = 0; j < K; ++j)
                if (g[j] != 0.0) gk += g[j] * post(static_cast<Eigen::Index>(j));
            dprobs(row, static_cast<Eigen::Index>(k)) = static_cast<Scalar>(weight * (gk - g_dot_mixed) / z);
        }
    }
    for (double v : term.per_position) term.value += v;
    if (grad) {
        const Mat dlogits = DenoiserModel<Scalar>::softmax_backward(cache.probs, dprobs);
        model.backward(cache, dlogits, *grad);
    }
    return term;
}

/// Draws t uniformly from {1..T} and x_t ~ q(x_t | x0); returns T times that
/// term, the one-sample estimate of the bound without its constant L_T part.
template <typename Scalar>
LossSample elbo_loss(const DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                     const seq::TokenSequence& x0, Rng& rng, std::vector<Scalar>* grad = nullptr,
                     double weight = 1.0) {
    const std::size_t T = s.steps();
    const std::size_t t = 1 + static_cast<std::size_t>(rng.below(T));
    LossSample out;
    out.xt = diffusion::forward_sample(s, x0, t, rng);
    const double scale = static_cast<double>(T);
    out.term = elbo_term(model, s, x0, t, out.xt, grad, weight * scale);
    out.estimate = scale * out.term.value;
    return out;
}

/// Sums every t instead of sampling one, with one x_t draw per t.
template <typename Scalar>
double elbo_time_sum(const DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                     const seq::TokenSequence& x0, Rng& rng, std::vector<ElboTerm>* terms = nullptr) {
    double total = 0.0;
    for (std::size_t t = 1; t <= s.steps(); ++t) {
        const auto xt = diffusion::forward_sample(s, x0, t, rng);
        ElboTerm term = elbo_term(model, s, x0, t, xt);
        total += term.value;
        if (terms) terms->push_back(std::move(term));
    }
    return total;
}

}  // namespace capd::denoiser
