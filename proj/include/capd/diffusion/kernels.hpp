#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capd/error.hpp"
#include "capd/rng.hpp"
#include "capd/diffusion/schedule.hpp"
#include "capd/seqcore/sequence.hpp"

namespace capd::diffusion {

/// Positionwise categorical distributions, one row per canvas position.
using Distributions = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Categorical = Eigen::VectorXd;

/// q(x_t | x_0) for every position: column x0[i] of Q̄_t.
inline Distributions marginal(const TransitionSchedule& s, const seq::TokenSequence& x0, std::size_t t) {
    s.check_step(t);
    const Matrix& bar = s.cumulative(t);
    Distributions out(static_cast<Eigen::Index>(x0.canvas_length()), static_cast<Eigen::Index>(s.states()));
    for (std::size_t i = 0; i < x0.canvas_length(); ++i) {
        if (x0[i] >= s.absorb_state()) throw DataError("marginal: x0 must be a clean sequence");
        out.row(static_cast<Eigen::Index>(i)) = bar.col(x0[i]).transpose();
    }
    return out;
}

/// Draws one token per position from its row.
inline seq::TokenSequence sample_tokens(const Distributions& d, Rng& rng) {
    seq::TokenSequence ts(static_cast<std::size_t>(d.rows()), 0);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        const auto row = d.row(i);
        ts[static_cast<std::size_t>(i)] = static_cast<seq::Token>(rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
    }
    return ts;
}

inline seq::TokenSequence forward_sample(const TransitionSchedule& s, const seq::TokenSequence& x0, std::size_t t,
                                         Rng& rng) {
    return sample_tokens(marginal(s, x0, t), rng);
}

/// Unnormalised posterior weights Q_t(x_t, j) * Q̄_{t-1}(j, x0) over x_{t-1} = j.
/// Returns their sum, which equals q(x_t | x_0).
inline double posterior_numerator(const TransitionSchedule& s, std::size_t xt, std::size_t x0, std::size_t t,
                                  double* out) {
    const Matrix& q = s.step(t);
    const Matrix& prev = s.cumulative(t - 1);
    const auto K = static_cast<Eigen::Index>(s.states());
    double total = 0.0;
    for (Eigen::Index j = 0; j < K; ++j) {
        const double v = q(static_cast<Eigen::Index>(xt), j) * prev(j, static_cast<Eigen::Index>(x0));
        out[j] = v;
        total += v;
    }
    return total;
}

/// True posterior q(x_{t-1} | x_t, x_0) for 2 <= t <= T.
inline Categorical posterior(const TransitionSchedule& s, std::size_t xt, std::size_t x0, std::size_t t) {
    if (t < 2 || t > s.steps())
        throw DataError("posterior: timestep " + std::to_string(t) + " outside [2, " + std::to_string(s.steps()) + "]");
    if (xt >= s.states() || x0 >= s.absorb_state()) throw DataError("posterior: state index out of range");
    Categorical p(static_cast<Eigen::Index>(s.states()));
    const double z = posterior_numerator(s, xt, x0, t, p.data());
    if (!(z > 0.0)) throw DataError("inconsistent (x_t, x_0) pair");
    p /= z;
    return p;
}

/// Posteriors for every data-token x0 against a fixed x_t, as rows of a
/// (K-1) x K table. Rows whose conditioning pair has zero probability are
/// left at zero and flagged in `consistent`.
struct PosteriorTable {
    Distributions rows;
    std::vector<bool> consistent;
};

inline PosteriorTable posterior_table(const TransitionSchedule& s, std::size_t xt, std::size_t t) {
    const std::size_t K = s.states();
    PosteriorTable tab{Distributions::Zero(static_cast<Eigen::Index>(K - 1), static_cast<Eigen::Index>(K)),
                       std::vector<bool>(K - 1, false)};
    for (std::size_t x0 = 0; x0 + 1 < K; ++x0) {
        double* row = tab.rows.row(static_cast<Eigen::Index>(x0)).data();
        const double z = posterior_numerator(s, xt, x0, t, row);
        if (z > 0.0) {
            for (std::size_t j = 0; j < K; ++j) row[j] /= z;
            tab.consistent[x0] = true;
        } else {
            for (std::size_t j = 0; j < K; ++j) row[j] = 0.0;
        }
    }
    return tab;
}

/// Mixes the posterior rows with weights `p_x0` (length K-1). Candidates that
/// cannot have produced x_t carry no weight; the rest are renormalised.
/// Returns the normaliser so callers can backpropagate through it.
inline double mix_posteriors(const PosteriorTable& tab, const double* p_x0, double* out) {
    const auto K = tab.rows.cols();
    for (Eigen::Index j = 0; j < K; ++j) out[j] = 0.0;
    double z = 0.0;
    for (Eigen::Index k = 0; k < tab.rows.rows(); ++k) {
        if (!tab.consistent[static_cast<std::size_t>(k)]) continue;
        const double w = p_x0[k];
        z += w;
        if (w == 0.0) continue;
        const double* row = tab.rows.row(k).data();
        for (Eigen::Index j = 0; j < K; ++j) out[j] += w * row[j];
    }
    if (!(z > 0.0)) throw DataError("malformed p_x0: no mass on any x_0 consistent with x_t");
    for (Eigen::Index j = 0; j < K; ++j) out[j] /= z;
    return z;
}

inline void check_x0_distribution(const Distributions& p_x0, std::size_t positions, std::size_t data_states) {
    if (static_cast<std::size_t>(p_x0.rows()) != positions || static_cast<std::size_t>(p_x0.cols()) != data_states)
        throw DataError("malformed p_x0: expected " + std::to_string(positions) + "x" + std::to_string(data_states));
    for (Eigen::Index i = 0; i < p_x0.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index k = 0; k < p_x0.cols(); ++k) {
            const double v = p_x0(i, k);
            if (!(v >= 0.0) || !std::isfinite(v)) throw DataError("malformed p_x0: negative or non-finite entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw DataError("malformed p_x0: row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
}

/// p_theta(x_{t-1} | x_t) = sum_{x0} q(x_{t-1} | x_t, x0) p_theta(x0 | x_t), per
/// position. `p_x0` has one column per data token (absorb excluded). At t = 1
/// the x0 prediction itself is returned, padded with a zero absorb column.
inline Distributions reverse_step(const TransitionSchedule& s, const seq::TokenSequence& xt, const Distributions& p_x0,
                                  std::size_t t) {
    s.check_step(t);
    const std::size_t K = s.states();
    check_x0_distribution(p_x0, xt.canvas_length(), K - 1);
    Distributions out = Distributions::Zero(static_cast<Eigen::Index>(xt.canvas_length()), static_cast<Eigen::Index>(K));
    if (t == 1) {
        out.leftCols(static_cast<Eigen::Index>(K - 1)) = p_x0;
        return out;
    }
    for (std::size_t i = 0; i < xt.canvas_length(); ++i) {
        if (xt[i] >= K) throw DataError("reverse_step: token out of range");
        const PosteriorTable tab = posterior_table(s, xt[i], t);
        mix_posteriors(tab, p_x0.row(static_cast<Eigen::Index>(i)).data(),
                       out.row(static_cast<Eigen::Index>(i)).data());
    }
    return out;
}

}  // namespace capd::diffusion
