#pragma once

#include <vector>

#include "uvsg/tensor.hpp"

namespace uvsg {

enum class Interp { nearest, bilinear };

// Normalized 1-D Gaussian taps; radius defaults to ceil(3*sigma).
std::vector<float> gaussian_kernel1d(double sigma, int radius = -1);

// Separable Gaussian blur of every channel plane, replicate edges.
Tensor gaussian_blur(const Tensor& x, double sigma, int radius = -1);

// Backward warp: out(p) = x(p + field(p)), field is [2,H,W] with dy in
// plane 0 and dx in plane 1, in pixels. Samples clamp to the edge.
Tensor warp(const Tensor& x, const Tensor& field, Interp mode);

// Inverse-mapped affine about the image center: rotate by angle_deg, scale,
// then translate by (ty,tx) pixels. Out-of-bounds samples read as 0.
Tensor affine_warp(const Tensor& x, double angle_deg, double ty, double tx, double scale,
                   Interp mode);

// Squared Sobel gradient magnitude of a [1,H,W] map, replicate edges,
// rebinarized: any nonzero response becomes 1.
Tensor sobel_edge(const Tensor& label);

Tensor flip_horizontal(const Tensor& x);
Tensor flip_vertical(const Tensor& x);

inline void clamp01(Tensor& x) {
    for (float& v : x.data) v = std::clamp(v, 0.f, 1.f);
}

}  // namespace uvsg
