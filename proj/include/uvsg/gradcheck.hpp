#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "uvsg/rng.hpp"
#include "uvsg/tape.hpp"
#include "uvsg/tensor.hpp"

namespace uvsg {

// build(tape, param_ids) must register nothing but reads of the given leaves
// and return the id of a scalar loss node. Runs in 64-bit precision; finite
// differences are not reliable in float.
template <typename S = double, typename BuildFn>
double grad_check(BuildFn build, std::vector<TensorT<S>> params, double eps) {
    std::vector<TensorT<S>> analytic;
    {
        TapeT<S> tape;
        std::vector<int> ids;
        ids.reserve(params.size());
        for (const auto& p : params) ids.push_back(tape.input(p));
        const int loss = build(tape, ids);
        tape.backward(loss);
        for (int id : ids) analytic.push_back(tape.gradient(id));
    }
    auto eval = [&](const std::vector<TensorT<S>>& ps) {
        TapeT<S> tape;
        std::vector<int> ids;
        for (const auto& p : ps) ids.push_back(tape.input(p));
        return tape.value(build(tape, ids)).data[0];
    };
    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t ci = 0; ci < params[pi].data.size(); ++ci) {
            const S orig = params[pi].data[ci];
            params[pi].data[ci] = orig + static_cast<S>(eps);
            const S fp = eval(params);
            params[pi].data[ci] = orig - static_cast<S>(eps);
            const S fm = eval(params);
            params[pi].data[ci] = orig;
            const double numeric = static_cast<double>((fp - fm) / (S(2) * static_cast<S>(eps)));
            const double a = static_cast<double>(analytic[pi].data[ci]);
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

// Same check restricted to a seeded random sample of coordinates per
// parameter tensor. Exhaustive finite differences over a million-parameter
// network would need millions of forward passes; sampling keeps the check
// tractable while still touching every parameter tensor.
//
// Central differences are only valid where the function is smooth across the
// whole stencil. A perturbation that flips any leaky_relu pre-activation sign
// crosses a kink, where the two-sided difference measures an average of two
// one-sided slopes instead of the gradient; such coordinates are detected via
// the activation sign hash and redrawn.
template <typename S = double, typename BuildFn>
double grad_check_sampled(BuildFn build, std::vector<TensorT<S>> params, double eps,
                          int coords_per_param, std::uint64_t seed) {
    std::vector<TensorT<S>> analytic;
    std::uint64_t base_hash = 0;
    {
        TapeT<S> tape;
        std::vector<int> ids;
        for (const auto& p : params) ids.push_back(tape.input(p));
        const int loss = build(tape, ids);
        base_hash = tape.activation_sign_hash();
        tape.backward(loss);
        for (int id : ids) analytic.push_back(tape.gradient(id));
    }
    auto eval = [&](const std::vector<TensorT<S>>& ps) {
        TapeT<S> tape;
        std::vector<int> ids;
        for (const auto& p : ps) ids.push_back(tape.input(p));
        const S v = tape.value(build(tape, ids)).data[0];
        return std::pair<S, std::uint64_t>(v, tape.activation_sign_hash());
    };
    Rng rng(seed);
    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const std::size_t n = params[pi].data.size();
        const int want = static_cast<int>(std::min<std::size_t>(coords_per_param, n));
        int done = 0;
        for (int attempt = 0; done < want && attempt < want * 20; ++attempt) {
            const std::size_t ci = static_cast<std::size_t>(rng.below(n));
            const S orig = params[pi].data[ci];
            params[pi].data[ci] = orig + static_cast<S>(eps);
            const auto [fp, hp] = eval(params);
            params[pi].data[ci] = orig - static_cast<S>(eps);
            const auto [fm, hm] = eval(params);
            params[pi].data[ci] = orig;
            if (hp != base_hash || hm != base_hash) continue;  // stencil crosses a kink
            ++done;
            const double numeric = static_cast<double>((fp - fm) / (S(2) * static_cast<S>(eps)));
            const double a = static_cast<double>(analytic[pi].data[ci]);
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > max_rel) max_rel = rel;
        }
    }
    return max_rel;
}

}  // namespace uvsg
