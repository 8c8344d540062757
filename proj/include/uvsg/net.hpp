#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "uvsg/cross.hpp"
#include "uvsg/rng.hpp"
#include "uvsg/tape.hpp"
#include "uvsg/tensor.hpp"

namespace uvsg {

struct NetworkConfig {
    int enc_stages = 5;
    int dec_stages = 4;
    int features = 64;
    int kernel = 3;
    float slope = 0.01f;
    int in_channels_query = 1;
    int in_channels_support = 2;
    Reduction reduction = Reduction::input_order;

    void validate() const {
        if (dec_stages != enc_stages - 1) throw ConfigError("dec_stages must equal enc_stages - 1");
        if (enc_stages < 1 || features < 1) throw ConfigError("bad network config");
        if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel size must be odd");
        if (!(slope > 0.f && slope < 1.f)) throw ConfigError("slope must be in (0,1)");
    }
    int size_divisor() const { return 1 << (enc_stages - 1); }
};

template <typename T>
struct ModelParametersT {
    std::vector<CrossBlockParamsT<T>> encoder;
    std::vector<CrossBlockParamsT<T>> decoder;
    ConvParamsT<T> projection;

    std::vector<std::pair<std::string, TensorT<T>*>> named_tensors() {
        std::vector<std::pair<std::string, TensorT<T>*>> out;
        auto block = [&](const std::string& prefix, CrossBlockParamsT<T>& b) {
            out.emplace_back(prefix + ".theta_z.weight", &b.theta_z.weight);
            out.emplace_back(prefix + ".theta_z.bias", &b.theta_z.bias);
            out.emplace_back(prefix + ".theta_v.weight", &b.theta_v.weight);
            out.emplace_back(prefix + ".theta_v.bias", &b.theta_v.bias);
        };
        for (std::size_t s = 0; s < encoder.size(); ++s) block("enc" + std::to_string(s), encoder[s]);
        for (std::size_t s = 0; s < decoder.size(); ++s) block("dec" + std::to_string(s), decoder[s]);
        out.emplace_back("proj.weight", &projection.weight);
        out.emplace_back("proj.bias", &projection.bias);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto& [name, t] : named_tensors()) n += t->numel();
        return n;
    }

    template <typename U>
    ModelParametersT<U> cast() const {
        ModelParametersT<U> out;
        auto conv = [](const ConvParamsT<T>& c) {
            return ConvParamsT<U>{c.weight.template cast<U>(), c.bias.template cast<U>()};
        };
        for (const auto& b : encoder)
            out.encoder.push_back({conv(b.theta_z), conv(b.theta_v)});
        for (const auto& b : decoder)
            out.decoder.push_back({conv(b.theta_z), conv(b.theta_v)});
        out.projection = conv(projection);
        return out;
    }
};

using ModelParameters = ModelParametersT<float>;

namespace detail {

// Input channel widths for theta_z at each stage. The first encoder stage
// fuses the raw query (1 ch) with image-label support pairs (2 ch); deeper
// encoder stages fuse two feature-width streams; decoder stages fuse two
// concatenated (upsampled + skip) streams.
inline int theta_z_in_channels(const NetworkConfig& cfg, bool decoder, int stage) {
    if (decoder) return 4 * cfg.features;
    if (stage == 0) return cfg.in_channels_query + cfg.in_channels_support;
    return 2 * cfg.features;
}

}  // namespace detail

template <typename T>
ModelParametersT<T> init_network(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    auto init_conv = [&](int c_out, int c_in, int k) {
        ConvParamsT<T> p;
        p.weight = TensorT<T>(Shape{c_out, c_in, k, k});
        p.bias = TensorT<T>(Shape{c_out});
        const double bound = std::sqrt(1.0 / (static_cast<double>(c_in) * k * k));
        for (auto& v : p.weight.data) v = static_cast<T>(rng.uniform(-bound, bound));
        return p;
    };
    ModelParametersT<T> params;
    for (int s = 0; s < cfg.enc_stages; ++s) {
        CrossBlockParamsT<T> b;
        b.theta_z = init_conv(cfg.features, detail::theta_z_in_channels(cfg, false, s), cfg.kernel);
        b.theta_v = init_conv(cfg.features, cfg.features, cfg.kernel);
        params.encoder.push_back(std::move(b));
    }
    for (int s = 0; s < cfg.dec_stages; ++s) {
        CrossBlockParamsT<T> b;
        b.theta_z = init_conv(cfg.features, detail::theta_z_in_channels(cfg, true, s), cfg.kernel);
        b.theta_v = init_conv(cfg.features, cfg.features, cfg.kernel);
        params.decoder.push_back(std::move(b));
    }
    params.projection = init_conv(1, cfg.features, 1);
    return params;
}

inline ModelParameters init_network(const NetworkConfig& cfg, Rng& rng) {
    return init_network<float>(cfg, rng);
}

struct NetParamIds {
    std::vector<CrossBlockParamIds> encoder;
    std::vector<CrossBlockParamIds> decoder;
    ConvParamIds projection;

    std::vector<int> all() const {
        std::vector<int> out;
        auto block = [&](const CrossBlockParamIds& b) {
            out.push_back(b.theta_z.weight);
            out.push_back(b.theta_z.bias);
            out.push_back(b.theta_v.weight);
            out.push_back(b.theta_v.bias);
        };
        for (const auto& b : encoder) block(b);
        for (const auto& b : decoder) block(b);
        out.push_back(projection.weight);
        out.push_back(projection.bias);
        return out;
    }
};

template <typename T>
NetParamIds register_network(TapeT<T>& tape, const ModelParametersT<T>& params) {
    NetParamIds ids;
    for (const auto& b : params.encoder) ids.encoder.push_back(register_cross_block_params(tape, b));
    for (const auto& b : params.decoder) ids.decoder.push_back(register_cross_block_params(tape, b));
    ids.projection = register_conv_params(tape, params.projection);
    return ids;
}

// Full encoder-decoder pass on the tape. query: [1,H,W] node,
// support_batch: [n,2,H,W] node. Returns the logits node [1,H,W].
template <typename T>
int forward_node(TapeT<T>& tape, const NetParamIds& ids, int query_id, int support_batch_id,
                 const NetworkConfig& cfg) {
    const T slope = static_cast<T>(cfg.slope);
    int u = query_id;
    int v = support_batch_id;
    std::vector<int> skip_u, skip_v;
    for (int s = 0; s < cfg.enc_stages; ++s) {
        auto [u2, v2] = cross_block_node(tape, u, v, ids.encoder[s], slope, cfg.reduction);
        u = u2;
        v = v2;
        skip_u.push_back(u);
        skip_v.push_back(v);
        if (s + 1 < cfg.enc_stages) {
            const auto& us = tape.value(u).shape;
            u = tape.bilinear_resize(u, us[1] / 2, us[2] / 2);
            v = tape.bilinear_resize(v, us[1] / 2, us[2] / 2);
        }
    }
    for (int s = 0; s < cfg.dec_stages; ++s) {
        const int skip = cfg.enc_stages - 2 - s;
        const auto& target = tape.value(skip_u[skip]).shape;
        u = tape.bilinear_resize(u, target[1], target[2]);
        v = tape.bilinear_resize(v, target[1], target[2]);
        u = tape.concat_channels(u, skip_u[skip]);
        v = tape.concat_channels(v, skip_v[skip]);
        auto [u2, v2] = cross_block_node(tape, u, v, ids.decoder[s], slope, cfg.reduction);
        u = u2;
        v = v2;
    }
    return tape.conv2d(u, ids.projection.weight, ids.projection.bias, Padding::same);
}

template <typename T>
TensorT<T> stack_support(const std::vector<std::pair<TensorT<T>, TensorT<T>>>& support) {
    if (support.empty()) throw DomainError("empty support set");
    const auto& s0 = support[0].first.shape;
    TensorT<T> out(Shape{static_cast<int>(support.size()), 2, s0[1], s0[2]});
    const std::size_t plane = static_cast<std::size_t>(s0[1]) * s0[2];
    for (std::size_t i = 0; i < support.size(); ++i) {
        const auto& [img, lbl] = support[i];
        if (img.shape != s0 || lbl.shape != s0) throw ShapeError("support entry shape mismatch");
        std::copy_n(img.data.data(), plane, out.data.data() + i * 2 * plane);
        std::copy_n(lbl.data.data(), plane, out.data.data() + i * 2 * plane + plane);
    }
    return out;
}

template <typename T>
void validate_episode_inputs(const NetworkConfig& cfg, const TensorT<T>& query,
                             const std::vector<std::pair<TensorT<T>, TensorT<T>>>& support,
                             bool strict) {
    if (query.rank() != 3 || query.shape[0] != cfg.in_channels_query)
        throw ShapeError("query must be [1,H,W]");
    if (support.empty()) throw DomainError("empty support set");
    const int div = cfg.size_divisor();
    if (query.shape[1] % div != 0 || query.shape[2] % div != 0)
        throw ShapeError("spatial size must be divisible by " + std::to_string(div));
    if (strict) {
        for (const auto& [img, lbl] : support) {
            for (T v : img.data)
                if (v < T(0) || v > T(1)) throw DomainError("support image values must be in [0,1]");
            for (T v : lbl.data)
                if (v != T(0) && v != T(1)) throw DomainError("support label values must be in {0,1}");
        }
    }
}

template <typename T>
TensorT<T> forward(const ModelParametersT<T>& params, const NetworkConfig& cfg,
                   const TensorT<T>& query,
                   const std::vector<std::pair<TensorT<T>, TensorT<T>>>& support,
                   bool strict = true) {
    validate_episode_inputs(cfg, query, support, strict);
    TapeT<T> tape;
    NetParamIds ids = register_network(tape, params);
    const int q = tape.input(query);
    const int s = tape.input(stack_support(support));
    return tape.value(forward_node(tape, ids, q, s, cfg));
}

template <typename T>
TensorT<T> predict_soft(const ModelParametersT<T>& params, const NetworkConfig& cfg,
                        const TensorT<T>& query,
                        const std::vector<std::pair<TensorT<T>, TensorT<T>>>& support,
                        bool strict = true) {
    TensorT<T> logits = forward(params, cfg, query, support, strict);
    for (T& v : logits.data) v = T(1) / (T(1) + std::exp(-v));
    return logits;
}

}  // namespace uvsg
