#pragma once

#include <utility>
#include <vector>

#include "uvsg/tape.hpp"
#include "uvsg/tensor.hpp"

namespace uvsg {

template <typename T>
struct ConvParamsT {
    TensorT<T> weight;  // [C_out,C_in,k,k]
    TensorT<T> bias;    // [C_out]
};

// theta_z consumes the channel-concatenation of the query stream with one
// support stream; theta_v maps the fused activation back to the support width.
template <typename T>
struct CrossBlockParamsT {
    ConvParamsT<T> theta_z;
    ConvParamsT<T> theta_v;
};

using ConvParams = ConvParamsT<float>;
using CrossBlockParams = CrossBlockParamsT<float>;

struct ConvParamIds {
    int weight = -1;
    int bias = -1;
};
struct CrossBlockParamIds {
    ConvParamIds theta_z;
    ConvParamIds theta_v;
};

template <typename T>
ConvParamIds register_conv_params(TapeT<T>& tape, const ConvParamsT<T>& p) {
    return {tape.input(p.weight), tape.input(p.bias)};
}

template <typename T>
CrossBlockParamIds register_cross_block_params(TapeT<T>& tape, const CrossBlockParamsT<T>& p) {
    return {register_conv_params(tape, p.theta_z), register_conv_params(tape, p.theta_v)};
}

// Tiled CrossConv on the tape: the support entries live along the leading
// batch axis and share one convolution call.
//   u: [C_u,H,W], v_batch: [n,C_v,H,W] -> z: [n,C,H,W]
template <typename T>
int cross_conv_node(TapeT<T>& tape, int u_id, int v_batch_id, const ConvParamIds& theta_z) {
    const auto& v = tape.value(v_batch_id);
    if (v.rank() != 4) throw ShapeError("cross_conv support batch must be [n,C_v,H,W]");
    const int n = v.shape[0];
    const int tiled = tape.concat_channels(tape.broadcast_batch(u_id, n), v_batch_id);
    return tape.conv2d(tiled, theta_z.weight, theta_z.bias, Padding::same);
}

// One CrossBlock: fuse the query with every support entry, average the
// activated fusions into the new query stream, and refresh each support
// stream with a shared per-entry convolution.
template <typename T>
std::pair<int, int> cross_block_node(TapeT<T>& tape, int u_id, int v_batch_id,
                                     const CrossBlockParamIds& params, T slope,
                                     Reduction red = Reduction::input_order) {
    const int z = tape.leaky_relu(cross_conv_node(tape, u_id, v_batch_id, params.theta_z), slope);
    const int u_out = tape.mean_batch(z, red);
    const int v_out =
        tape.leaky_relu(tape.conv2d(z, params.theta_v.weight, params.theta_v.bias, Padding::same), slope);
    return {u_out, v_out};
}

// Value-level contract: one output per support entry, in input order.
template <typename T>
std::vector<TensorT<T>> cross_conv(const TensorT<T>& u, const std::vector<TensorT<T>>& V,
                                   const ConvParamsT<T>& theta_z) {
    if (V.empty()) throw DomainError("cross_conv: empty support set");
    TapeT<T> tape;
    const int u_id = tape.input(u);
    std::vector<int> v_ids;
    for (const auto& v : V) v_ids.push_back(tape.input(v));
    const int z = cross_conv_node(tape, u_id, tape.stack_batch(v_ids), register_conv_params(tape, theta_z));
    std::vector<TensorT<T>> out;
    for (std::size_t i = 0; i < V.size(); ++i)
        out.push_back(tape.value(tape.index_batch(z, static_cast<int>(i))));
    return out;
}

template <typename T>
std::pair<TensorT<T>, std::vector<TensorT<T>>> cross_block(const TensorT<T>& u,
                                                           const std::vector<TensorT<T>>& V,
                                                           const CrossBlockParamsT<T>& params,
                                                           T slope,
                                                           Reduction red = Reduction::input_order) {
    if (V.empty()) throw DomainError("cross_block: empty support set");
    TapeT<T> tape;
    const int u_id = tape.input(u);
    std::vector<int> v_ids;
    for (const auto& v : V) v_ids.push_back(tape.input(v));
    auto [u_out, v_out] = cross_block_node(tape, u_id, tape.stack_batch(v_ids),
                                           register_cross_block_params(tape, params), slope, red);
    std::vector<TensorT<T>> vs;
    for (std::size_t i = 0; i < V.size(); ++i)
        vs.push_back(tape.value(tape.index_batch(v_out, static_cast<int>(i))));
    return {tape.value(u_out), std::move(vs)};
}

// Oracle for the tiled path: per-entry explicit loops, no batching, no GEMM.
template <typename T>
std::vector<TensorT<T>> cross_conv_reference(const TensorT<T>& u, const std::vector<TensorT<T>>& V,
                                             const ConvParamsT<T>& theta_z) {
    if (V.empty()) throw DomainError("cross_conv_reference: empty support set");
    const int cu = u.shape[0], h = u.shape[1], w = u.shape[2];
    const int c_out = theta_z.weight.shape[0];
    const int c_in = theta_z.weight.shape[1];
    const int k = theta_z.weight.shape[2];
    const int pad = (k - 1) / 2;
    std::vector<TensorT<T>> out;
    for (const auto& v : V) {
        if (v.shape[1] != h || v.shape[2] != w) throw ShapeError("cross_conv_reference spatial mismatch");
        const int cv = v.shape[0];
        if (cu + cv != c_in) throw ShapeError("cross_conv_reference channel mismatch");
        TensorT<T> z(Shape{c_out, h, w});
        for (int co = 0; co < c_out; ++co) {
            for (int oy = 0; oy < h; ++oy) {
                for (int ox = 0; ox < w; ++ox) {
                    T acc = theta_z.bias.data[co];
                    for (int ci = 0; ci < c_in; ++ci) {
                        for (int ky = 0; ky < k; ++ky) {
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy - pad + ky;
                                const int ix = ox - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                const T x = ci < cu ? u.at(ci, iy, ix) : v.at(ci - cu, iy, ix);
                                acc += theta_z.weight.at(co, ci, ky, kx) * x;
                            }
                        }
                    }
                    z.at(co, oy, ox) = acc;
                }
            }
        }
        out.push_back(std::move(z));
    }
    return out;
}

// Elementwise mean of a homogeneous list.
template <typename T>
TensorT<T> reduce_mean(const std::vector<TensorT<T>>& xs) {
    if (xs.empty()) throw DomainError("reduce_mean of empty list");
    TensorT<T> out(xs[0].shape);
    for (const auto& x : xs) {
        if (x.shape != out.shape) throw ShapeError("reduce_mean shape mismatch");
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += x.data[i];
    }
    const T inv = T(1) / static_cast<T>(xs.size());
    for (T& v : out.data) v *= inv;
    return out;
}

}  // namespace uvsg
