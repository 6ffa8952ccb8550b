#pragma once

// Brute-force reference computations used only by tests. Nothing here calls
// into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;  // [row][col]

/// One-step matrix built straight from the rates: column n is the
/// distribution of x_t given x_{t-1} = n, last state absorbing.
inline Dense step_matrix(std::size_t K, double beta, double gamma) {
    const double alpha = 1.0 - static_cast<double>(K - 1) * beta - gamma;
    Dense q(K, std::vector<double>(K, 0.0));
    for (std::size_t n = 0; n + 1 < K; ++n) {
        for (std::size_t m = 0; m + 1 < K; ++m) q[m][n] = (m == n) ? alpha + beta : beta;
        q[K - 1][n] = gamma;
    }
    q[K - 1][K - 1] = 1.0;
    return q;
}

inline Dense multiply(const Dense& a, const Dense& b) {
    const std::size_t n = a.size(), k = b.size(), m = b[0].size();
    Dense c(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = 0; l < k; ++l) c[i][j] += a[i][l] * b[l][j];
    return c;
}

/// A chain given by its per-step matrices Q_1..Q_T (index 0 is Q_1).
struct Chain {
    std::size_t K;
    std::vector<Dense> q;

    static Chain from_rates(std::size_t K, const std::vector<double>& beta, const std::vector<double>& gamma) {
        Chain c{K, {}};
        for (std::size_t t = 0; t < beta.size(); ++t) c.q.push_back(step_matrix(K, beta[t], gamma[t]));
        return c;
    }

    std::size_t steps() const { return q.size(); }

    /// Probability of a whole trajectory x_1..x_t (path[0] = x_1) from x0.
    double path_probability(std::size_t x0, const std::vector<std::size_t>& path) const {
        double p = 1.0;
        std::size_t prev = x0;
        for (std::size_t s = 0; s < path.size(); ++s) {
            p *= q[s][path[s]][prev];
            prev = path[s];
        }
        return p;
    }

    /// Visits every trajectory of length t with its probability.
    void for_each_path(std::size_t x0, std::size_t t,
                       const std::function<void(const std::vector<std::size_t>&, double)>& fn) const {
        std::vector<std::size_t> path(t, 0);
        while (true) {
            fn(path, path_probability(x0, path));
            std::size_t i = 0;
            while (i < t && ++path[i] == K) path[i++] = 0;
            if (i == t) return;
        }
    }

    /// q(x_t | x0) by summing over every intermediate trajectory.
    std::vector<double> marginal(std::size_t x0, std::size_t t) const {
        std::vector<double> m(K, 0.0);
        for_each_path(x0, t, [&](const std::vector<std::size_t>& p, double w) { m[p.back()] += w; });
        return m;
    }

    /// q(x_{t-1} = j, x_t | x0) jointly, from trajectories.
    Dense joint_last_two(std::size_t x0, std::size_t t) const {
        Dense j(K, std::vector<double>(K, 0.0));  // [x_{t-1}][x_t]
        for_each_path(x0, t, [&](const std::vector<std::size_t>& p, double w) { j[p[t - 2]][p[t - 1]] += w; });
        return j;
    }

    /// q(x_{t-1} | x_t, x0) = joint / marginal; empty when q(x_t | x0) = 0.
    std::vector<double> posterior(std::size_t xt, std::size_t x0, std::size_t t) const {
        const Dense j = joint_last_two(x0, t);
        double z = 0.0;
        for (std::size_t a = 0; a < K; ++a) z += j[a][xt];
        if (z <= 0.0) return {};
        std::vector<double> p(K);
        for (std::size_t a = 0; a < K; ++a) p[a] = j[a][xt] / z;
        return p;
    }
};

/// Levenshtein distance by naive recursion over every alignment.
inline std::size_t exhaustive_edit_distance(const std::string& a, const std::string& b, std::size_t i = 0,
                                            std::size_t j = 0) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    const std::size_t sub = exhaustive_edit_distance(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    const std::size_t del = exhaustive_edit_distance(a, b, i + 1, j) + 1;
    const std::size_t ins = exhaustive_edit_distance(a, b, i, j + 1) + 1;
    return std::min({sub, del, ins});
}

/// Single-linkage component count from a full distance matrix.
inline std::size_t union_find_components(const std::vector<std::vector<std::size_t>>& dist, std::size_t radius) {
    const std::size_t n = dist.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (dist[i][j] <= radius) parent[find(i)] = find(j);
    std::set<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) roots.insert(find(i));
    return roots.size();
}

/// Value at 1-based rank `rank` of the ascending sort.
inline double nearest_rank(std::vector<double> v, std::size_t rank) {
    std::sort(v.begin(), v.end());
    return v.at(rank - 1);
}

/// Root of w1 N(m1, s1) = w2 N(m2, s2) lying between the means.
inline double density_intersection(double w1, double m1, double s1, double w2, double m2, double s2) {
    // ln(w1/s1) - (x-m1)^2/(2 s1^2) = ln(w2/s2) - (x-m2)^2/(2 s2^2)
    const double a = 1.0 / (2 * s2 * s2) - 1.0 / (2 * s1 * s1);
    const double b = m1 / (s1 * s1) - m2 / (s2 * s2);
    const double c = m2 * m2 / (2 * s2 * s2) - m1 * m1 / (2 * s1 * s1) + std::log((w1 * s2) / (w2 * s1));
    const double lo = std::min(m1, m2), hi = std::max(m1, m2);
    if (std::abs(a) < 1e-14) return -c / b;
    const double disc = std::sqrt(b * b - 4 * a * c);
    for (double r : {(-b + disc) / (2 * a), (-b - disc) / (2 * a)})
        if (r >= lo && r <= hi) return r;
    return std::nan("");
}

/// Per-position x0 probabilities [position][token] predicted from x_t at step t.
using Denoise = std::function<Dense(const std::vector<std::size_t>& xt, std::size_t t)>;

/// Full variational bound by walking every forward trajectory x_1..x_T of a
/// whole canvas: E_q[log q(x_{1:T} | x0) - log p(x_{0:T})], with p(x_T)
/// putting all mass on the all-absorbing canvas and
/// p(x_{t-1} | x_t) = sum_k w_k q(x_{t-1} | x_t, x0 = k), w = p(x0 | x_t)
/// restricted to x0 values that can reach x_t, renormalised.
inline double path_elbo(const Chain& chain, const std::vector<std::size_t>& x0, const Denoise& denoise) {
    const std::size_t K = chain.K, L = x0.size(), T = chain.steps();
    std::size_t states = 1;
    for (std::size_t i = 0; i < L; ++i) states *= K;
    auto unpack = [&](std::size_t code) {
        std::vector<std::size_t> x(L);
        for (std::size_t i = 0; i < L; ++i, code /= K) x[i] = code % K;
        return x;
    };
    std::map<std::pair<std::size_t, std::size_t>, Dense> predictions;
    auto predict = [&](std::size_t t, std::size_t code) -> const Dense& {
        auto key = std::make_pair(t, code);
        auto it = predictions.find(key);
        if (it == predictions.end()) it = predictions.emplace(key, denoise(unpack(code), t)).first;
        return it->second;
    };
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> posteriors;
    auto posterior = [&](std::size_t xt, std::size_t k, std::size_t t) -> const std::vector<double>& {
        auto key = std::make_tuple(xt, k, t);
        auto it = posteriors.find(key);
        if (it == posteriors.end()) it = posteriors.emplace(key, chain.posterior(xt, k, t)).first;
        return it->second;
    };
    // log p(x_{t-1} | x_t) for whole canvases; t >= 2.
    auto log_reverse = [&](const std::vector<std::size_t>& prev, std::size_t xt_code, std::size_t t) {
        const auto xt = unpack(xt_code);
        const Dense& px0 = predict(t, xt_code);
        double lp = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k + 1 < K; ++k) {
                const auto& post = posterior(xt[i], k, t);
                if (post.empty()) continue;
                den += px0[i][k];
                num += px0[i][k] * post[prev[i]];
            }
            lp += std::log(num / den);
        }
        return lp;
    };

    double elbo = 0.0;
    std::vector<std::size_t> codes(T + 1);  // codes[t] for t >= 1
    std::function<void(std::size_t, double, double)> walk = [&](std::size_t t, double prob, double log_ratio) {
        if (t > T) {
            const auto xT = unpack(codes[T]);
            for (std::size_t i = 0; i < L; ++i)
                if (xT[i] != K - 1) {
                    elbo = std::nan("");  // q reaches a canvas the prior excludes
                    return;
                }
            elbo += prob * log_ratio;
            return;
        }
        const auto prev = t == 1 ? x0 : unpack(codes[t - 1]);
        for (std::size_t code = 0; code < states; ++code) {
            const auto x = unpack(code);
            double step = 1.0;
            for (std::size_t i = 0; i < L && step > 0.0; ++i) step *= chain.q[t - 1][x[i]][prev[i]];
            if (step <= 0.0) continue;
            codes[t] = code;
            double lr = log_ratio + std::log(step);
            if (t == 1) {
                const Dense& px0 = predict(1, code);
                for (std::size_t i = 0; i < L; ++i) lr -= std::log(px0[i][x0[i]]);
            } else {
                lr -= log_reverse(prev, code, t);
            }
            walk(t + 1, prob * step, lr);
        }
    };
    walk(1, 1.0, 0.0);
    return elbo;
}

}  // namespace oracle
