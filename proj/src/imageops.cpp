#include "uvsg/imageops.hpp"

#include <cmath>

namespace uvsg {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void check_chw(const Tensor& x, const char* what) {
    if (x.shape.size() != 3) throw ShapeError(std::string(what) + " expects [C,H,W], got " + shape_str(x.shape));
}

// Sample with bilinear weights, clamping the source coordinate to the edge.
float sample_bilinear_clamp(const Tensor& x, int c, double sy, double sx) {
    const int h = x.shape[1], w = x.shape[2];
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = sy - y0, fx = sx - x0;
    return static_cast<float>((1 - fy) * ((1 - fx) * x.at(c, y0, x0) + fx * x.at(c, y0, x1)) +
                              fy * ((1 - fx) * x.at(c, y1, x0) + fx * x.at(c, y1, x1)));
}

}  // namespace

std::vector<float> gaussian_kernel1d(double sigma, int radius) {
    if (sigma <= 0.0) return {1.f};
    if (radius < 0) radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (float& v : k) v = static_cast<float>(v / sum);
    return k;
}

Tensor gaussian_blur(const Tensor& x, double sigma, int radius) {
    check_chw(x, "gaussian_blur");
    const auto k = gaussian_kernel1d(sigma, radius);
    const int r = static_cast<int>(k.size()) / 2;
    if (r == 0) return x;
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor tmp(x.shape), out(x.shape);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) acc += k[t + r] * x.at(ch, y, clampi(xx + t, 0, w - 1));
                tmp.at(ch, y, xx) = static_cast<float>(acc);
            }
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp.at(ch, clampi(y + t, 0, h - 1), xx);
                out.at(ch, y, xx) = static_cast<float>(acc);
            }
    }
    return out;
}

Tensor warp(const Tensor& x, const Tensor& field, Interp mode) {
    check_chw(x, "warp");
    if (field.shape.size() != 3 || field.shape[0] != 2 || field.shape[1] != x.shape[1] ||
        field.shape[2] != x.shape[2])
        throw ShapeError("warp field must be [2,H,W] matching the image, got " + shape_str(field.shape));
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor out(x.shape);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            const double sy = y + field.at(0, y, xx);
            const double sx = xx + field.at(1, y, xx);
            if (mode == Interp::nearest) {
                const int ny = clampi(static_cast<int>(std::lround(sy)), 0, h - 1);
                const int nx = clampi(static_cast<int>(std::lround(sx)), 0, w - 1);
                for (int ch = 0; ch < c; ++ch) out.at(ch, y, xx) = x.at(ch, ny, nx);
            } else {
                for (int ch = 0; ch < c; ++ch) out.at(ch, y, xx) = sample_bilinear_clamp(x, ch, sy, sx);
            }
        }
    return out;
}

Tensor affine_warp(const Tensor& x, double angle_deg, double ty, double tx, double scale,
                   Interp mode) {
    check_chw(x, "affine_warp");
    if (scale <= 0.0) throw DomainError("affine_warp scale must be positive");
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    const double a = std::fmod(std::fmod(angle_deg, 360.0) + 360.0, 360.0) * (M_PI / 180.0);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Tensor out(x.shape);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            // invert: out(p) = x(R(-a)/s * (p - c - t) + c)
            const double dy = y - cy - ty, dx = xx - cx - tx;
            const double sy = (ca * dy - sa * dx) / scale + cy;
            const double sx = (sa * dy + ca * dx) / scale + cx;
            for (int ch = 0; ch < c; ++ch) {
                float v = 0.f;
                if (mode == Interp::nearest) {
                    const long ny = std::lround(sy), nx = std::lround(sx);
                    if (ny >= 0 && ny < h && nx >= 0 && nx < w)
                        v = x.at(ch, static_cast<int>(ny), static_cast<int>(nx));
                } else {
                    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
                    const double fy = sy - y0, fx = sx - x0;
                    double acc = 0.0;
                    for (int oy = 0; oy <= 1; ++oy)
                        for (int ox = 0; ox <= 1; ++ox) {
                            const int yy = y0 + oy, xw = x0 + ox;
                            if (yy < 0 || yy >= h || xw < 0 || xw >= w) continue;  // zero fill
                            acc += (oy ? fy : 1 - fy) * (ox ? fx : 1 - fx) * x.at(ch, yy, xw);
                        }
                    v = static_cast<float>(acc);
                }
                out.at(ch, y, xx) = v;
            }
        }
    return out;
}

Tensor sobel_edge(const Tensor& label) {
    check_chw(label, "sobel_edge");
    if (label.shape[0] != 1) throw ShapeError("sobel_edge expects a single-channel map");
    const int h = label.shape[1], w = label.shape[2];
    static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    Tensor out(label.shape);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int i = -1; i <= 1; ++i)
                for (int j = -1; j <= 1; ++j) {
                    const float v = label.at(0, clampi(y + i, 0, h - 1), clampi(x + j, 0, w - 1));
                    gx += kx[i + 1][j + 1] * v;
                    gy += kx[j + 1][i + 1] * v;
                }
            out.at(0, y, x) = (gx * gx + gy * gy) > 0.0 ? 1.f : 0.f;
        }
    return out;
}

Tensor flip_horizontal(const Tensor& x) {
    check_chw(x, "flip_horizontal");
    Tensor out(x.shape);
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(ch, y, xx) = x.at(ch, y, w - 1 - xx);
    return out;
}

Tensor flip_vertical(const Tensor& x) {
    check_chw(x, "flip_vertical");
    Tensor out(x.shape);
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(ch, y, xx) = x.at(ch, h - 1 - y, xx);
    return out;
}

}  // namespace uvsg
