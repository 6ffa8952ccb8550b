#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capd/denoiser/config.hpp"
#include "capd/denoiser/parameters.hpp"
#include "capd/error.hpp"
#include "capd/rng.hpp"
#include "capd/seqcore/sequence.hpp"

namespace capd::denoiser {

/// Attention encoder predicting p(x_0 | x_t) at every canvas position.
///
/// Pre-norm blocks: x += MHA(LN(x)); x += FFN(LN(x)); then a final LayerNorm
/// and a linear head over the data tokens. The input is a token embedding plus
/// fixed sinusoidal position and timestep encodings. Backpropagation is written
/// out by hand against a cache filled by `forward`.
template <typename Scalar>
class DenoiserModel {
public:
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
    using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    static constexpr Scalar kLayerNormEps = Scalar(1e-5);

    struct LayerIndex {
        std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };

    struct NormCache {
        Mat xhat;
        ColVec rstd;
    };

    struct LayerCache {
        NormCache ln1, ln2;
        Mat a, q, k, v, o;
        std::vector<Mat> attn;  // per head, L x L
        Mat b, u, g;
    };

    struct Cache {
        std::vector<seq::Token> tokens;
        std::vector<LayerCache> layers;
        NormCache lnf;
        Mat f;
        Mat probs;
    };

    DenoiserModel() = default;

    explicit DenoiserModel(const DenoiserConfig& cfg) : config_(cfg) {
        config_.validate();
        const std::size_t H = cfg.hidden, I = cfg.intermediate;
        embed_ = params_.add("embed.weight", {cfg.vocab_in(), H}, true);
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            const std::string p = "block" + std::to_string(l) + ".";
            LayerIndex li{};
            li.ln1_g = params_.add(p + "ln1.gamma", {H}, false);
            li.ln1_b = params_.add(p + "ln1.beta", {H}, false);
            li.wq = params_.add(p + "attn.q.weight", {H, H}, true);
            li.bq = params_.add(p + "attn.q.bias", {H}, false);
            li.wk = params_.add(p + "attn.k.weight", {H, H}, true);
            li.bk = params_.add(p + "attn.k.bias", {H}, false);
            li.wv = params_.add(p + "attn.v.weight", {H, H}, true);
            li.bv = params_.add(p + "attn.v.bias", {H}, false);
            li.wo = params_.add(p + "attn.out.weight", {H, H}, true);
            li.bo = params_.add(p + "attn.out.bias", {H}, false);
            li.ln2_g = params_.add(p + "ln2.gamma", {H}, false);
            li.ln2_b = params_.add(p + "ln2.beta", {H}, false);
            li.w1 = params_.add(p + "ffn.up.weight", {H, I}, true);
            li.b1 = params_.add(p + "ffn.up.bias", {I}, false);
            li.w2 = params_.add(p + "ffn.down.weight", {I, H}, true);
            li.b2 = params_.add(p + "ffn.down.bias", {H}, false);
            layers_.push_back(li);
        }
        lnf_g_ = params_.add("final_ln.gamma", {H}, false);
        lnf_b_ = params_.add("final_ln.beta", {H}, false);
        head_w_ = params_.add("head.weight", {H, cfg.vocab_out}, true);
        head_b_ = params_.add("head.bias", {cfg.vocab_out}, false);
        for (std::size_t i = 0; i < params_.tensors().size(); ++i)
            if (params_.tensor(i).name.ends_with("gamma"))
                for (auto& x : params_.values(i)) x = Scalar(1);
        build_encodings();
    }

    /// Gaussian init scaled by fan-in; LayerNorm gains stay at 1, biases at 0.
    void initialize(std::uint64_t seed) {
        Rng rng(seed);
        for (std::size_t i = 0; i < params_.tensors().size(); ++i) {
            const auto& t = params_.tensor(i);
            if (!t.decay) continue;
            const double scale = (i == embed_) ? 1.0 : 1.0 / std::sqrt(static_cast<double>(t.rows()));
            for (auto& x : params_.values(i)) x = static_cast<Scalar>(rng.normal() * scale);
        }
    }

    const DenoiserConfig& config() const { return config_; }
    ParameterStore<Scalar>& parameters() { return params_; }
    const ParameterStore<Scalar>& parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    /// Per-position distributions over the `vocab_out` data tokens.
    Mat forward(const seq::TokenSequence& xt, std::size_t t, Cache* cache = nullptr) const {
        const std::size_t L = xt.canvas_length();
        if (t < 1 || t > config_.steps)
            throw DataError("timestep " + std::to_string(t) + " out of range [1, " + std::to_string(config_.steps) + "]");
        if (L > config_.canvas_length)
            throw DataError("canvas of " + std::to_string(L) + " exceeds model canvas " + std::to_string(config_.canvas_length));
        for (seq::Token tok : xt.tokens)
            if (tok >= config_.vocab_in()) throw DataError("token index out of model vocabulary");

        Cache local;
        Cache& c = cache ? *cache : local;
        c.tokens = xt.tokens;
        c.layers.resize(config_.layers);

        const auto H = static_cast<Eigen::Index>(config_.hidden);
        const auto E = params_.matrix(embed_);
        Mat x(static_cast<Eigen::Index>(L), H);
        for (std::size_t i = 0; i < L; ++i) {
            x.row(static_cast<Eigen::Index>(i)) = E.row(xt[i]) + time_code_.row(static_cast<Eigen::Index>(t - 1));
            if (config_.position_encoding) x.row(static_cast<Eigen::Index>(i)) += position_code_.row(static_cast<Eigen::Index>(i));
        }

        for (std::size_t l = 0; l < config_.layers; ++l) x = block_forward(layers_[l], x, c.layers[l]);

        c.f = layer_norm(x, lnf_g_, lnf_b_, c.lnf);
        Mat logits = c.f * params_.matrix(head_w_);
        logits.rowwise() += params_.row(head_b_);
        c.probs = softmax_rows(logits);
        return c.probs;
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
    void backward(const Cache& c, const Mat& dlogits, std::vector<Scalar>& grad) const {
        if (grad.size() != params_.size()) grad.assign(params_.size(), Scalar(0));
        params_.matrix_in(grad, head_w_).noalias() += c.f.transpose() * dlogits;
        params_.row_in(grad, head_b_) += dlogits.colwise().sum();
        Mat df = dlogits * params_.matrix(head_w_).transpose();
        Mat dx = layer_norm_backward(df, c.lnf, lnf_g_, lnf_b_, grad);

        for (std::size_t l = config_.layers; l-- > 0;) dx = block_backward(layers_[l], c.layers[l], dx, grad);

        auto dE = params_.matrix_in(grad, embed_);
        for (std::size_t i = 0; i < c.tokens.size(); ++i) dE.row(c.tokens[i]) += dx.row(static_cast<Eigen::Index>(i));
    }

    /// Turns d(loss)/d(probs) into d(loss)/d(logits) through the softmax.
    static Mat softmax_backward(const Mat& probs, const Mat& dprobs) {
        Mat d(probs.rows(), probs.cols());
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            const Scalar dot = probs.row(i).dot(dprobs.row(i));
            d.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot);
        }
        return d;
    }

    static Mat softmax_rows(const Mat& logits) {
        Mat p(logits.rows(), logits.cols());
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const Scalar mx = logits.row(i).maxCoeff();
            p.row(i) = (logits.row(i).array() - mx).exp();
            p.row(i) /= p.row(i).sum();
        }
        return p;
    }

    static Mat sinusoid_table(std::size_t rows, std::size_t dim, double offset) {
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t k = 0; k < dim; ++k) {
                const double freq = std::pow(10000.0, -static_cast<double>(2 * (k / 2)) / static_cast<double>(dim));
                const double angle = (static_cast<double>(r) + offset) * freq;
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
                    static_cast<Scalar>(k % 2 == 0 ? std::sin(angle) : std::cos(angle));
            }
        return m;
    }

private:
    void build_encodings() {
        position_code_ = sinusoid_table(config_.canvas_length, config_.hidden, 0.0);
        time_code_ = sinusoid_table(config_.steps, config_.hidden, 1.0);  // row t-1 encodes t
    }

    static Scalar activate(Activation a, Scalar u) {
        if (a == Activation::relu) return u > Scalar(0) ? u : Scalar(0);
        return Scalar(0.5) * u * (Scalar(1) + std::erf(u / std::numbers::sqrt2_v<Scalar>));
    }

    static Scalar activate_grad(Activation a, Scalar u) {
        if (a == Activation::relu) return u > Scalar(0) ? Scalar(1) : Scalar(0);
        const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(u / std::numbers::sqrt2_v<Scalar>));
        const Scalar pdf = std::exp(Scalar(-0.5) * u * u) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
        return cdf + u * pdf;
    }

    Mat layer_norm(const Mat& x, std::size_t g, std::size_t b, NormCache& nc) const {
        const auto n = static_cast<Scalar>(x.cols());
        nc.xhat.resize(x.rows(), x.cols());
        nc.rstd.resize(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const Scalar mean = x.row(i).sum() / n;
            const Scalar var = (x.row(i).array() - mean).square().sum() / n;
            const Scalar rstd = Scalar(1) / std::sqrt(var + kLayerNormEps);
            nc.rstd(i) = rstd;
            nc.xhat.row(i) = (x.row(i).array() - mean) * rstd;
        }
        Mat y = nc.xhat.array().rowwise() * params_.row(g).array();
        y.rowwise() += params_.row(b);
        return y;
    }

    Mat layer_norm_backward(const Mat& dy, const NormCache& nc, std::size_t g, std::size_t b,
                            std::vector<Scalar>& grad) const {
        params_.row_in(grad, g) += (dy.array() * nc.xhat.array()).colwise().sum().matrix();
        params_.row_in(grad, b) += dy.colwise().sum();
        const Mat dxhat = dy.array().rowwise() * params_.row(g).array();
        const auto n = static_cast<Scalar>(dy.cols());
        Mat dx(dy.rows(), dy.cols());
        for (Eigen::Index i = 0; i < dy.rows(); ++i) {
            const Scalar mean_d = dxhat.row(i).sum() / n;
            const Scalar mean_dx = dxhat.row(i).dot(nc.xhat.row(i)) / n;
            dx.row(i) = nc.rstd(i) * (dxhat.row(i).array() - mean_d - nc.xhat.row(i).array() * mean_dx);
        }
        return dx;
    }

    Mat linear(const Mat& x, std::size_t w, std::size_t b) const {
        Mat y = x * params_.matrix(w);
        y.rowwise() += params_.row(b);
        return y;
    }

    Mat block_forward(const LayerIndex& li, const Mat& x, LayerCache& c) const {
        const auto dk = static_cast<Eigen::Index>(config_.head_dim());
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));
        const Eigen::Index L = x.rows();

        c.a = layer_norm(x, li.ln1_g, li.ln1_b, c.ln1);
        c.q = linear(c.a, li.wq, li.bq);
        c.k = linear(c.a, li.wk, li.bk);
        c.v = linear(c.a, li.wv, li.bv);
        c.o.resize(L, x.cols());
        c.attn.resize(config_.heads);
        for (std::size_t h = 0; h < config_.heads; ++h) {
            const Eigen::Index off = static_cast<Eigen::Index>(h) * dk;
            const Mat scores = (c.q.middleCols(off, dk) * c.k.middleCols(off, dk).transpose()) * scale;
            c.attn[h] = softmax_rows(scores);
            c.o.middleCols(off, dk).noalias() = c.attn[h] * c.v.middleCols(off, dk);
        }
        Mat mid = x + linear(c.o, li.wo, li.bo);

        c.b = layer_norm(mid, li.ln2_g, li.ln2_b, c.ln2);
        c.u = linear(c.b, li.w1, li.b1);
        c.g = c.u.unaryExpr([a = config_.activation](Scalar v) { return activate(a, v); });
        return mid + linear(c.g, li.w2, li.b2);
    }

    Mat block_backward(const LayerIndex& li, const LayerCache& c, const Mat& dout, std::vector<Scalar>& grad) const {
        const auto dk = static_cast<Eigen::Index>(config_.head_dim());
        const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));

        // feed-forward branch
        params_.matrix_in(grad, li.w2).noalias() += c.g.transpose() * dout;
        params_.row_in(grad, li.b2) += dout.colwise().sum();
        const Mat dg = dout * params_.matrix(li.w2).transpose();
        const Mat du = dg.array() * c.u.unaryExpr([a = config_.activation](Scalar v) { return activate_grad(a, v); }).array();
        params_.matrix_in(grad, li.w1).noalias() += c.b.transpose() * du;
        params_.row_in(grad, li.b1) += du.colwise().sum();
        const Mat db = du * params_.matrix(li.w1).transpose();
        const Mat dmid = dout + layer_norm_backward(db, c.ln2, li.ln2_g, li.ln2_b, grad);

        // attention branch
        params_.matrix_in(grad, li.wo).noalias() += c.o.transpose() * dmid;
        params_.row_in(grad, li.bo) += dmid.colwise().sum();
        const Mat dO = dmid * params_.matrix(li.wo).transpose();
        Mat dq(c.q.rows(), c.q.cols()), dkm(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
        for (std::size_t h = 0; h < config_.heads; ++h) {
            const Eigen::Index off = static_cast<Eigen::Index>(h) * dk;
            const Mat& P = c.attn[h];
            const Mat dOh = dO.middleCols(off, dk);
            const Mat dP = dOh * c.v.middleCols(off, dk).transpose();
            dv.middleCols(off, dk).noalias() = P.transpose() * dOh;
            Mat dS(P.rows(), P.cols());
            for (Eigen::Index i = 0; i < P.rows(); ++i) {
                const Scalar dot = P.row(i).dot(dP.row(i));
                dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
            }
            dS *= scale;
            dq.middleCols(off, dk).noalias() = dS * c.k.middleCols(off, dk);
            dkm.middleCols(off, dk).noalias() = dS.transpose() * c.q.middleCols(off, dk);
        }
        params_.matrix_in(grad, li.wq).noalias() += c.a.transpose() * dq;
        params_.row_in(grad, li.bq) += dq.colwise().sum();
        params_.matrix_in(grad, li.wk).noalias() += c.a.transpose() * dkm;
        params_.row_in(grad, li.bk) += dkm.colwise().sum();
        params_.matrix_in(grad, li.wv).noalias() += c.a.transpose() * dv;
        params_.row_in(grad, li.bv) += dv.colwise().sum();
        Mat da = dq * params_.matrix(li.wq).transpose();
        da.noalias() += dkm * params_.matrix(li.wk).transpose();
        da.noalias() += dv * params_.matrix(li.wv).transpose();
        return dmid + layer_norm_backward(da, c.ln1, li.ln1_g, li.ln1_b, grad);
    }

    DenoiserConfig config_;
    ParameterStore<Scalar> params_;
    std::size_t embed_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
    std::vector<LayerIndex> layers_;
    Mat position_code_, time_code_;
};

}  // namespace capd::denoiser
