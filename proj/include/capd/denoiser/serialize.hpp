#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "capd/denoiser/model.hpp"
#include "capd/error.hpp"
#include "capd/io.hpp"

namespace capd::denoiser {

// Layout (all integers little-endian u32):
//   "CAPD" | version | json_len | json header | tensor_count |
//   per tensor: name_len | name | ndim | dims... | f32 values
// The header is {"model": config, "schedule": schedule config or null}.
inline constexpr char kModelMagic[4] = {'C', 'A', 'P', 'D'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::string_view take(std::size_t n) {
        if (data_.size() - pos_ < n) throw TruncatedFile("model file truncated");
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint32_t u32() {
        const auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << (8 * i);
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
    bool done() const { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

template <typename Scalar>
std::string serialize_model(const DenoiserModel<Scalar>& model, const nlohmann::json& schedule = nullptr) {
    std::string out(kModelMagic, 4);
    detail::put_u32(out, kModelVersion);
    const std::string cfg = nlohmann::json{{"model", model.config().to_json()}, {"schedule", schedule}}.dump();
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    const auto& store = model.parameters();
    detail::put_u32(out, static_cast<std::uint32_t>(store.tensors().size()));
    for (std::size_t i = 0; i < store.tensors().size(); ++i) {
        const auto& t = store.tensor(i);
        detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
        for (Scalar v : store.values(i)) detail::put_f32(out, static_cast<float>(v));
    }
    return out;
}

namespace detail {

inline nlohmann::json read_header(Reader& r, std::string_view bytes) {
    if (bytes.size() < 4) throw TruncatedFile("model file truncated");
    if (std::memcmp(r.take(4).data(), kModelMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kModelVersion) throw UnsupportedVersion("unsupported model version " + std::to_string(version));
    const std::uint32_t cfg_len = r.u32();
    try {
        auto j = nlohmann::json::parse(r.take(cfg_len));
        if (!j.is_object() || !j.contains("model")) throw FormatError("model header lacks a model config");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model header: ") + e.what());
    }
}

}  // namespace detail

/// The schedule block stored alongside the weights (null when absent).
inline nlohmann::json read_model_schedule(std::string_view bytes) {
    detail::Reader r(bytes);
    return detail::read_header(r, bytes).value("schedule", nlohmann::json(nullptr));
}

template <typename Scalar = float>
DenoiserModel<Scalar> deserialize_model(std::string_view bytes) {
    detail::Reader r(bytes);
    const nlohmann::json header = detail::read_header(r, bytes);
    DenoiserConfig cfg;
    try {
        cfg = DenoiserConfig::from_json(header.at("model"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config block: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model config block: ") + e.what());
    }
    DenoiserModel<Scalar> model(cfg);
    auto& store = model.parameters();
    const std::uint32_t count = r.u32();
    if (count != store.tensors().size()) throw FormatError("model file tensor count does not match its config");
    for (std::uint32_t n = 0; n < count; ++n) {
        const std::string name(r.take(r.u32()));
        const std::size_t idx = store.find(name);
        const auto& t = store.tensor(idx);
        const std::uint32_t ndim = r.u32();
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = r.u32();
        if (shape != t.shape) throw FormatError("shape mismatch for " + name);
        for (auto& v : store.values(idx)) v = static_cast<Scalar>(r.f32());
    }
    if (!r.done()) throw FormatError("trailing bytes after model parameters");
    return model;
}

template <typename Scalar>
void save_model(const DenoiserModel<Scalar>& model, const std::filesystem::path& path,
                const nlohmann::json& schedule = nullptr) {
    io::write_atomic(path, serialize_model(model, schedule));
}

template <typename Scalar = float>
DenoiserModel<Scalar> load_model(const std::filesystem::path& path) {
    return deserialize_model<Scalar>(io::read_text(path));
}

/// Float copy of a model, e.g. after training in double precision.
template <typename To, typename From>
DenoiserModel<To> cast_model(const DenoiserModel<From>& src) {
    DenoiserModel<To> dst(src.config());
    const auto& a = src.parameters().flat();
    auto& b = dst.parameters().flat();
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = static_cast<To>(a[i]);
    return dst;
}

}  // namespace capd::denoiser
