#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "capd/denoiser/loss.hpp"
#include "capd/denoiser/model.hpp"
#include "capd/diffusion/kernels.hpp"
#include "capd/error.hpp"
#include "capd/rng.hpp"
#include "capd/seqcore/sequence.hpp"

namespace capd::denoiser {

struct TrainConfig {
    double warmup_ratio = 0.1;
    double learning_rate = 1e-4;
    double weight_decay = 0.04;
    std::size_t batch_size = 64;
    std::size_t epochs = 50;
    std::size_t max_steps = 0;  // overrides epochs when non-zero
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) throw ConfigError("train: warmup_ratio must be in [0, 1]");
        if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
        if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        try {
            if (j.contains("warmup_ratio")) c.warmup_ratio = j.at("warmup_ratio").get<double>();
            if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
            if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
            if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
            if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
            if (j.contains("max_steps")) c.max_steps = j.at("max_steps").get<std::size_t>();
            if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("train config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

/// Linear warmup to the peak rate, then linear decay to zero at the last step.
/// `step` is 1-based.
inline double scheduled_learning_rate(double peak, double warmup_ratio, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) return peak;
    const auto warmup = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
    if (step <= warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
    if (total_steps == warmup) return peak;
    const double remaining = static_cast<double>(total_steps - std::min(step, total_steps));
    return peak * remaining / static_cast<double>(total_steps - warmup);
}

template <typename Scalar>
struct OptimizerState {
    std::vector<Scalar> m, v;
    std::size_t step = 0;
};

/// One fully specified training example.
struct TrainingExample {
    seq::TokenSequence x0;
    std::size_t t = 1;
    seq::TokenSequence xt;
};

struct StepStats {
    std::size_t step = 0;
    double loss = 0.0;  // batch mean of the T-scaled estimate
    double learning_rate = 0.0;
    double grad_norm = 0.0;
};

/// Gradient of the batch-mean loss over fixed examples. Each example writes
/// its own buffer and the buffers are summed in example order, so the result
/// does not depend on `threads`. Returns the batch-mean T-scaled loss.
template <typename Scalar>
double batch_gradient(const DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                      std::span<const TrainingExample> batch, std::vector<Scalar>& grad, std::size_t threads = 1) {
    if (batch.empty()) throw DataError("empty training batch");
    const std::size_t n = batch.size();
    const double scale = static_cast<double>(s.steps()) / static_cast<double>(n);
    std::vector<std::vector<Scalar>> parts(n);
    std::vector<double> losses(n, 0.0);
    auto work = [&](std::size_t i) {
        parts[i].assign(model.parameter_count(), Scalar(0));
        losses[i] = elbo_term(model, s, batch[i].x0, batch[i].t, batch[i].xt, &parts[i], scale).value;
    };
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex mu;
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += threads) work(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }
    grad.assign(model.parameter_count(), Scalar(0));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += parts[i][k];
        loss += losses[i] * static_cast<double>(s.steps());
    }
    return loss / static_cast<double>(n);
}

/// AdamW update with decoupled weight decay. Throws NumericError and leaves
/// the parameters untouched when the gradient is not finite.
template <typename Scalar>
double apply_adamw(DenoiserModel<Scalar>& model, const std::vector<Scalar>& grad, double lr, const TrainConfig& cfg,
                   OptimizerState<Scalar>& opt) {
    auto& store = model.parameters();
    double sq = 0.0;
    for (Scalar g : grad) {
        if (!std::isfinite(static_cast<double>(g))) throw NumericError("non-finite gradient; step aborted");
        sq += static_cast<double>(g) * static_cast<double>(g);
    }
    if (opt.m.size() != store.size()) {
        opt.m.assign(store.size(), Scalar(0));
        opt.v.assign(store.size(), Scalar(0));
    }
    ++opt.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step));
    auto& theta = store.flat();
    for (const auto& tensor : store.tensors()) {
        const double decay = tensor.decay ? cfg.weight_decay : 0.0;
        for (std::size_t k = tensor.offset; k < tensor.offset + tensor.size; ++k) {
            const double g = static_cast<double>(grad[k]);
            const double m = b1 * static_cast<double>(opt.m[k]) + (1.0 - b1) * g;
            const double v = b2 * static_cast<double>(opt.v[k]) + (1.0 - b2) * g * g;
            opt.m[k] = static_cast<Scalar>(m);
            opt.v[k] = static_cast<Scalar>(v);
            const double update = lr * ((m / c1) / (std::sqrt(v / c2) + cfg.adam_eps) + decay * static_cast<double>(theta[k]));
            theta[k] = static_cast<Scalar>(static_cast<double>(theta[k]) - update);
        }
    }
    for (Scalar x : theta)
        if (!std::isfinite(static_cast<double>(x))) throw NumericError("non-finite parameter after update");
    return std::sqrt(sq);
}

/// Exact gradient of the batch loss followed by one AdamW step at `lr`.
template <typename Scalar>
StepStats backward_and_step(DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& s,
                            std::span<const TrainingExample> batch, double lr, const TrainConfig& cfg,
                            OptimizerState<Scalar>& opt) {
    std::vector<Scalar> grad;
    StepStats st;
    st.loss = batch_gradient(model, s, batch, grad, cfg.threads);
    if (!std::isfinite(st.loss)) throw NumericError("non-finite loss; step aborted");
    st.grad_norm = apply_adamw(model, grad, lr, cfg, opt);
    st.learning_rate = lr;
    st.step = opt.step;
    return st;
}

/// Epoch loop over a residue-string dataset. Every draw of a sequence gets a
/// fresh random del placement, a uniform t and a sample of x_t.
template <typename Scalar>
class Trainer {
public:
    using Callback = std::function<void(const StepStats&)>;

    Trainer(DenoiserModel<Scalar>& model, const diffusion::TransitionSchedule& schedule, TrainConfig cfg,
            const seq::Alphabet& alphabet = seq::Alphabet::protein())
        : model_(model), schedule_(schedule), cfg_(std::move(cfg)), alphabet_(alphabet), rng_(cfg_.seed) {
        cfg_.validate();
        detail::check_compatible(model.config(), schedule);
        if (model.config().vocab_out != alphabet.data_size())
            throw ConfigError("model vocabulary does not match the alphabet");
    }

    std::size_t total_steps(std::size_t dataset_size) const {
        if (cfg_.max_steps) return cfg_.max_steps;
        const std::size_t per_epoch = (dataset_size + cfg_.batch_size - 1) / cfg_.batch_size;
        return per_epoch * cfg_.epochs;
    }

    TrainingExample make_example(const std::string& residues) {
        TrainingExample ex;
        ex.x0 = seq::encode(residues, model_.config().canvas_length, rng_, alphabet_);
        ex.t = 1 + static_cast<std::size_t>(rng_.below(schedule_.steps()));
        ex.xt = diffusion::forward_sample(schedule_, ex.x0, ex.t, rng_);
        return ex;
    }

    std::vector<StepStats> fit(const std::vector<std::string>& data, const Callback& on_step = {}) {
        if (data.empty()) throw DataError("training set is empty");
        for (const auto& s : data) {
            if (s.size() > model_.config().canvas_length) throw DataError("sequence exceeds canvas: " + s);
            seq::check_residues(s, alphabet_);
        }
        const std::size_t total = total_steps(data.size());
        std::vector<StepStats> log;
        std::vector<std::size_t> order(data.size());
        std::size_t cursor = order.size();
        for (std::size_t step = 1; step <= total; ++step) {
            std::vector<TrainingExample> batch;
            batch.reserve(cfg_.batch_size);
            for (std::size_t b = 0; b < cfg_.batch_size && !(b > 0 && cursor == order.size()); ++b) {
                if (cursor == order.size()) {
                    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
                    rng_.shuffle(order);
                    cursor = 0;
                }
                batch.push_back(make_example(data[order[cursor++]]));
            }
            const double lr = scheduled_learning_rate(cfg_.learning_rate, cfg_.warmup_ratio, step, total);
            StepStats st = backward_and_step<Scalar>(model_, schedule_, batch, lr, cfg_, opt_);
            st.step = step;
            if (on_step) on_step(st);
            log.push_back(st);
        }
        return log;
    }

    OptimizerState<Scalar>& optimizer() { return opt_; }
    Rng& rng() { return rng_; }

private:
    DenoiserModel<Scalar>& model_;
    const diffusion::TransitionSchedule& schedule_;
    TrainConfig cfg_;
    const seq::Alphabet& alphabet_;
    Rng rng_;
    OptimizerState<Scalar> opt_;
};

}  // namespace capd::denoiser
