#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "capd/error.hpp"

namespace capd::denoiser {

enum class Activation { gelu, relu };

inline Activation parse_activation(const std::string& s) {
    if (s == "gelu") return Activation::gelu;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "'");
}

inline const char* to_string(Activation a) { return a == Activation::gelu ? "gelu" : "relu"; }

/// Shape of the attention encoder. Defaults are the desk-scale model;
/// `large()` is the 12-block configuration.
struct DenoiserConfig {
    std::size_t layers = 2;
    std::size_t hidden = 32;
    std::size_t heads = 4;
    std::size_t intermediate = 64;
    Activation activation = Activation::gelu;
    std::size_t canvas_length = 56;
    std::size_t vocab_out = 21;  // data tokens; the absorbing state is input-only
    std::size_t steps = 100;
    bool position_encoding = true;

    std::size_t vocab_in() const { return vocab_out + 1; }
    std::size_t head_dim() const { return hidden / heads; }

    static DenoiserConfig large() {
        DenoiserConfig c;
        c.layers = 12;
        c.hidden = 512;
        c.heads = 16;
        c.intermediate = 4096;
        return c;
    }

    void validate() const {
        if (layers < 1 || hidden < 1 || heads < 1 || intermediate < 1 || canvas_length < 1 || steps < 1)
            throw ConfigError("model: all dimensions must be >= 1");
        if (vocab_out < 2) throw ConfigError("model: vocab_out must be >= 2");
        if (hidden % heads != 0) throw ConfigError("model: hidden must be divisible by heads");
    }

    /// Closed-form parameter count.
    std::size_t parameter_count() const {
        const std::size_t H = hidden, I = intermediate;
        const std::size_t per_layer = 2 * H + 4 * (H * H + H) + 2 * H + (H * I + I) + (I * H + H);
        return vocab_in() * H + layers * per_layer + 2 * H + (H * vocab_out + vocab_out);
    }

    nlohmann::json to_json() const {
        return {{"layers", layers},
                {"hidden", hidden},
                {"heads", heads},
                {"intermediate", intermediate},
                {"activation", to_string(activation)},
                {"canvas_length", canvas_length},
                {"vocab_out", vocab_out},
                {"T", steps},
                {"position_encoding", position_encoding}};
    }

    static DenoiserConfig from_json(const nlohmann::json& j) {
        DenoiserConfig c;
        try {
            if (j.contains("layers")) c.layers = j.at("layers").get<std::size_t>();
            if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::size_t>();
            if (j.contains("heads")) c.heads = j.at("heads").get<std::size_t>();
            if (j.contains("intermediate")) c.intermediate = j.at("intermediate").get<std::size_t>();
            if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
            if (j.contains("canvas_length")) c.canvas_length = j.at("canvas_length").get<std::size_t>();
            if (j.contains("vocab_out")) c.vocab_out = j.at("vocab_out").get<std::size_t>();
            if (j.contains("T")) c.steps = j.at("T").get<std::size_t>();
            if (j.contains("position_encoding")) c.position_encoding = j.at("position_encoding").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("model config: ") + e.what());
        }
        c.validate();
        return c;
    }

    bool operator==(const DenoiserConfig&) const = default;
};

}  // namespace capd::denoiser
