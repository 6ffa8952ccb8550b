#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "capd/denoiser/loss.hpp"
#include "capd/denoiser/model.hpp"
#include "capd/diffusion/kernels.hpp"
#include "capd/diffusion/schedule.hpp"
#include "capd/error.hpp"
#include "capd/rng.hpp"
#include "capd/seqcore/alphabet.hpp"
#include "capd/seqcore/sequence.hpp"

namespace capd::gen {

inline constexpr std::size_t kMaxDecodeRetries = 10;

struct SampleOptions {
    std::size_t threads = 1;
    std::size_t max_retries = kMaxDecodeRetries;
};

struct SampleResult {
    std::vector<std::string> sequences;  // non-empty decodes, in draw order
    std::size_t requested = 0;
    std::size_t dropped_empty = 0;
    std::size_t retries = 0;
};

/// Rows of a model prediction as double-precision distributions.
template <typename Scalar>
diffusion::Distributions to_distributions(const typename denoiser::DenoiserModel<Scalar>::Mat& p) {
    diffusion::Distributions d = p.template cast<double>();
    for (Eigen::Index i = 0; i < d.rows(); ++i) d.row(i) /= d.row(i).sum();
    return d;
}

/// One reverse-chain run from the all-absorbing canvas down to x_0.
template <typename Scalar>
seq::TokenSequence denoise_canvas(const denoiser::DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                                  Rng& rng) {
    const std::size_t L = model.config().canvas_length;
    seq::TokenSequence x(L, static_cast<seq::Token>(s.absorb_state()));
    for (std::size_t t = s.steps(); t >= 2; --t) {
        const auto p_x0 = to_distributions<Scalar>(model.forward(x, t));
        x = diffusion::sample_tokens(diffusion::reverse_step(s, x, p_x0, t), rng);
    }
    return diffusion::sample_tokens(to_distributions<Scalar>(model.forward(x, 1)), rng);
}

/// Ancestral sampling of n canvases. Draw i uses its own stream split from
/// `seed`, so the result does not depend on the thread count.
template <typename Scalar>
SampleResult sample(const denoiser::DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                    std::size_t n, std::uint64_t seed, const SampleOptions& opts = {},
                    const seq::Alphabet& alphabet = seq::Alphabet::protein()) {
    denoiser::detail::check_compatible(model.config(), s);
    if (model.config().vocab_out != alphabet.data_size())
        throw ConfigError("model vocabulary does not match the alphabet");
    std::vector<std::optional<std::string>> out(n);
    std::vector<std::size_t> retries(n, 0);
    auto draw = [&](std::size_t i) {
        Rng rng = Rng::split(seed, i);
        for (std::size_t attempt = 0;; ++attempt) {
            const auto canvas = denoise_canvas(model, s, rng);
            try {
                out[i] = seq::decode(canvas, alphabet);
                return;
            } catch (const DataError&) {
                if (attempt + 1 >= opts.max_retries)
                    throw NumericError("absorbing token survived to x_0 after " + std::to_string(opts.max_retries) +
                                       " attempts");
                ++retries[i];
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) draw(i);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex mu;
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += threads) draw(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }
    SampleResult r;
    r.requested = n;
    for (std::size_t i = 0; i < n; ++i) {
        r.retries += retries[i];
        if (out[i]->empty())
            ++r.dropped_empty;
        else
            r.sequences.push_back(std::move(*out[i]));
    }
    return r;
}

struct PostprocessResult {
    std::vector<std::string> sequences;
    std::size_t duplicates_removed = 0;
    std::size_t training_overlap_removed = 0;
};

/// Order-preserving dedup, then removal of anything in the training set.
inline PostprocessResult postprocess(const std::vector<std::string>& samples,
                                     const std::unordered_set<std::string>& training_set) {
    PostprocessResult r;
    std::unordered_set<std::string> seen;
    std::vector<std::string> unique;
    for (const auto& s : samples) {
        if (seen.insert(s).second)
            unique.push_back(s);
        else
            ++r.duplicates_removed;
    }
    for (auto& s : unique) {
        if (training_set.contains(s))
            ++r.training_overlap_removed;
        else
            r.sequences.push_back(std::move(s));
    }
    return r;
}

/// n copies of `seed_sequence`, each with one random substitution, deletion
/// or insertion (kind chosen uniformly, then a uniform site and residue).
inline std::vector<std::string> single_mutation_baseline(const std::string& seed_sequence, std::size_t n, Rng& rng,
                                                         const seq::Alphabet& alphabet = seq::Alphabet::protein()) {
    seq::check_residues(seed_sequence, alphabet);
    const std::string& residues = alphabet.residues();
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::string s = seed_sequence;
        std::size_t kind = s.empty() ? 2 : rng.below(3);
        if (kind == 0) {
            const std::size_t pos = rng.below(s.size());
            char c;
            do c = residues[rng.below(residues.size())];
            while (residues.size() > 1 && c == s[pos]);
            s[pos] = c;
        } else if (kind == 1) {
            s.erase(rng.below(s.size()), 1);
        } else {
            s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size() + 1)), residues[rng.below(residues.size())]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace capd::gen
