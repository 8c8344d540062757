#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "uvsg/tensor.hpp"

namespace uvsg {

enum class Padding { same, valid };

// How the mean over the support/batch axis is accumulated. input_order is the
// fast production path; sorted sums the addends in value order, which makes
// the result exactly invariant under permutations of the batch.
enum class Reduction { input_order, sorted };

namespace detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

template <typename T>
void im2col(const T* x, int c_in, int h, int w, int k, int pad, int ho, int wo, T* col) {
    // col is (c_in*k*k) x (ho*wo), row-major
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(row + static_cast<std::size_t>(oy) * wo,
                                  row + static_cast<std::size_t>(oy + 1) * wo, T(0));
                        continue;
                    }
                    const T* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox - pad + kx;
                        row[static_cast<std::size_t>(oy) * wo + ox] =
                            (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_accum(const T* col, int c_in, int h, int w, int k, int pad, int ho, int wo, T* x) {
    for (int c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    T* dst = x + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox - pad + kx;
                        if (ix >= 0 && ix < w) dst[ix] += row[static_cast<std::size_t>(oy) * wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Reverse-mode tape. Node values are computed eagerly; backward() runs the
// recorded closures in reverse order. Leaf gradients accumulate across
// backward() calls until zero_grad().
template <typename T>
class TapeT {
public:
    using Tensor = TensorT<T>;

    int input(Tensor v) {
        nodes_.push_back(Node{std::move(v), {}, {}, nullptr, true});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor& value(int id) const { return nodes_.at(id).value; }
    const Tensor& gradient(int id) const {
        const Node& n = nodes_.at(id);
        if (n.grad.shape.empty()) throw StateError("gradient requested before backward");
        return n.grad;
    }
    std::size_t size() const { return nodes_.size(); }

    int conv2d(int x_id, int w_id, int b_id, Padding pad) {
        const Tensor& x = value(x_id);
        const Tensor& w = value(w_id);
        const Tensor& b = value(b_id);
        const bool batched = x.rank() == 4;
        if (!batched && x.rank() != 3) throw ShapeError("conv2d input must be [C,H,W] or [N,C,H,W]");
        if (w.rank() != 4) throw ShapeError("conv2d kernel must be [C_out,C_in,k,k]");
        const int n = batched ? x.shape[0] : 1;
        const int c_in = batched ? x.shape[1] : x.shape[0];
        const int h = batched ? x.shape[2] : x.shape[1];
        const int wd = batched ? x.shape[3] : x.shape[2];
        const int c_out = w.shape[0];
        const int k = w.shape[2];
        if (w.shape[1] != c_in)
            throw ShapeError("conv2d channel mismatch: input " + std::to_string(c_in) +
                             " vs kernel " + std::to_string(w.shape[1]));
        if (w.shape[3] != k) throw ShapeError("conv2d kernel must be square");
        if (b.rank() != 1 || b.shape[0] != c_out) throw ShapeError("conv2d bias must be [C_out]");
        if (pad == Padding::same && k % 2 == 0) throw ConfigError("same padding needs odd kernel size");
        const int p = pad == Padding::same ? (k - 1) / 2 : 0;
        const int ho = h + 2 * p - k + 1;
        const int wo = wd + 2 * p - k + 1;
        if (ho < 1 || wo < 1) throw ShapeError("conv2d output would be empty");

        Tensor y(batched ? Shape{n, c_out, ho, wo} : Shape{c_out, ho, wo});
        const int ckk = c_in * k * k;
        std::vector<T> col(static_cast<std::size_t>(ckk) * ho * wo);
        detail::CMapM<T> wm(w.data.data(), c_out, ckk);
        for (int i = 0; i < n; ++i) {
            const T* xi = x.data.data() + static_cast<std::size_t>(i) * c_in * h * wd;
            detail::im2col(xi, c_in, h, wd, k, p, ho, wo, col.data());
            detail::CMapM<T> cm(col.data(), ckk, ho * wo);
            detail::MapM<T> ym(y.data.data() + static_cast<std::size_t>(i) * c_out * ho * wo,
                               c_out, ho * wo);
            ym.noalias() = wm * cm;
            for (int r = 0; r < c_out; ++r) ym.row(r).array() += b.data[r];
        }

        return record(std::move(y), {x_id, w_id, b_id},
                      [x_id, w_id, b_id, n, c_in, h, wd, c_out, k, p, ho, wo](TapeT& t, const Tensor& g) {
                          const Tensor& x = t.value(x_id);
                          const Tensor& w = t.value(w_id);
                          const int ckk = c_in * k * k;
                          std::vector<T> col(static_cast<std::size_t>(ckk) * ho * wo);
                          std::vector<T> dcol(col.size());
                          detail::CMapM<T> wm(w.data.data(), c_out, ckk);
                          Tensor& dx = t.grad_buf(x_id);
                          Tensor& dw = t.grad_buf(w_id);
                          Tensor& db = t.grad_buf(b_id);
                          detail::MapM<T> dwm(dw.data.data(), c_out, ckk);
                          for (int i = 0; i < n; ++i) {
                              const T* xi = x.data.data() + static_cast<std::size_t>(i) * c_in * h * wd;
                              detail::im2col(xi, c_in, h, wd, k, p, ho, wo, col.data());
                              detail::CMapM<T> cm(col.data(), ckk, ho * wo);
                              detail::CMapM<T> gm(g.data.data() + static_cast<std::size_t>(i) * c_out * ho * wo,
                                                  c_out, ho * wo);
                              dwm.noalias() += gm * cm.transpose();
                              for (int r = 0; r < c_out; ++r) db.data[r] += gm.row(r).sum();
                              detail::MapM<T> dcm(dcol.data(), ckk, ho * wo);
                              dcm.noalias() = wm.transpose() * gm;
                              detail::col2im_accum(dcol.data(), c_in, h, wd, k, p, ho, wo,
                                                   dx.data.data() + static_cast<std::size_t>(i) * c_in * h * wd);
                          }
                      });
    }

    int concat_channels(int a_id, int b_id) {
        const Tensor& a = value(a_id);
        const Tensor& b = value(b_id);
        if (a.rank() != b.rank() || (a.rank() != 3 && a.rank() != 4))
            throw ShapeError("concat_channels expects two [C,H,W] or two [N,C,H,W]");
        const int cd = a.rank() == 4 ? 1 : 0;
        for (int d = 0; d < a.rank(); ++d)
            if (d != cd && a.shape[d] != b.shape[d])
                throw ShapeError("concat_channels extent mismatch: " + shape_str(a.shape) + " vs " +
                                 shape_str(b.shape));
        Shape os = a.shape;
        os[cd] += b.shape[cd];
        Tensor y(os);
        const int n = a.rank() == 4 ? a.shape[0] : 1;
        const std::size_t plane = static_cast<std::size_t>(a.shape[cd + 1]) * a.shape[cd + 2];
        const std::size_t a_blk = a.shape[cd] * plane, b_blk = b.shape[cd] * plane;
        for (int i = 0; i < n; ++i) {
            std::copy_n(a.data.data() + i * a_blk, a_blk, y.data.data() + i * (a_blk + b_blk));
            std::copy_n(b.data.data() + i * b_blk, b_blk,
                        y.data.data() + i * (a_blk + b_blk) + a_blk);
        }
        return record(std::move(y), {a_id, b_id},
                      [a_id, b_id, n, a_blk, b_blk](TapeT& t, const Tensor& g) {
                          Tensor& da = t.grad_buf(a_id);
                          Tensor& db = t.grad_buf(b_id);
                          for (int i = 0; i < n; ++i) {
                              const T* gi = g.data.data() + i * (a_blk + b_blk);
                              T* dai = da.data.data() + i * a_blk;
                              T* dbi = db.data.data() + i * b_blk;
                              for (std::size_t j = 0; j < a_blk; ++j) dai[j] += gi[j];
                              for (std::size_t j = 0; j < b_blk; ++j) dbi[j] += gi[a_blk + j];
                          }
                      });
    }

    int leaky_relu(int x_id, T slope) {
        if (!(slope > T(0) && slope < T(1))) throw ConfigError("leaky_relu slope must be in (0,1)");
        const Tensor& x = value(x_id);
        Tensor y = x;
        std::uint64_t h = act_sign_hash_;
        for (T& v : y.data) {
            h = h * 1099511628211ULL + (v > T(0) ? 1u : 0u);
            if (v < T(0)) v *= slope;
        }
        act_sign_hash_ = h;
        return record(std::move(y), {x_id}, [x_id, slope](TapeT& t, const Tensor& g) {
            const Tensor& x = t.value(x_id);
            Tensor& dx = t.grad_buf(x_id);
            for (std::size_t i = 0; i < x.data.size(); ++i)
                dx.data[i] += g.data[i] * (x.data[i] > T(0) ? T(1) : slope);
        });
    }

    int bilinear_resize(int x_id, int out_h, int out_w) {
        const Tensor& x = value(x_id);
        if (x.rank() != 3 && x.rank() != 4) throw ShapeError("bilinear_resize expects rank 3 or 4");
        if (out_h < 1 || out_w < 1) throw ConfigError("bilinear_resize output extents must be >= 1");
        const bool batched = x.rank() == 4;
        const int planes = batched ? x.shape[0] * x.shape[1] : x.shape[0];
        const int h = x.shape[batched ? 2 : 1], w = x.shape[batched ? 3 : 2];
        Shape os = x.shape;
        os[batched ? 2 : 1] = out_h;
        os[batched ? 3 : 2] = out_w;
        Tensor y(os);
        // align-corners=false sample points
        auto samples = resize_samples(h, w, out_h, out_w);
        for (int p = 0; p < planes; ++p) {
            const T* src = x.data.data() + static_cast<std::size_t>(p) * h * w;
            T* dst = y.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto& s = samples[i];
                dst[i] = static_cast<T>(s.w00) * src[s.i00] + static_cast<T>(s.w01) * src[s.i01] +
                         static_cast<T>(s.w10) * src[s.i10] + static_cast<T>(s.w11) * src[s.i11];
            }
        }
        return record(std::move(y), {x_id},
                      [x_id, planes, h, w, out_h, out_w](TapeT& t, const Tensor& g) {
                          auto samples = resize_samples(h, w, out_h, out_w);
                          Tensor& dx = t.grad_buf(x_id);
                          for (int p = 0; p < planes; ++p) {
                              T* d = dx.data.data() + static_cast<std::size_t>(p) * h * w;
                              const T* gd = g.data.data() + static_cast<std::size_t>(p) * out_h * out_w;
                              for (std::size_t i = 0; i < samples.size(); ++i) {
                                  const auto& s = samples[i];
                                  d[s.i00] += static_cast<T>(s.w00) * gd[i];
                                  d[s.i01] += static_cast<T>(s.w01) * gd[i];
                                  d[s.i10] += static_cast<T>(s.w10) * gd[i];
                                  d[s.i11] += static_cast<T>(s.w11) * gd[i];
                              }
                          }
                      });
    }

    // [N,C,H,W] -> [C,H,W] mean over the leading axis.
    int mean_batch(int x_id, Reduction red = Reduction::input_order) {
        const Tensor& x = value(x_id);
        if (x.rank() != 4) throw ShapeError("mean_batch expects [N,C,H,W]");
        const int n = x.shape[0];
        const std::size_t blk = x.numel() / n;
        Tensor y(Shape{x.shape[1], x.shape[2], x.shape[3]});
        if (red == Reduction::input_order) {
            for (int i = 0; i < n; ++i) {
                const T* src = x.data.data() + i * blk;
                for (std::size_t j = 0; j < blk; ++j) y.data[j] += src[j];
            }
        } else {
            std::vector<T> vals(n);
            for (std::size_t j = 0; j < blk; ++j) {
                for (int i = 0; i < n; ++i) vals[i] = x.data[i * blk + j];
                std::sort(vals.begin(), vals.end());
                T s = T(0);
                for (T v : vals) s += v;
                y.data[j] = s;
            }
        }
        const T inv = T(1) / static_cast<T>(n);
        for (T& v : y.data) v *= inv;
        return record(std::move(y), {x_id}, [x_id, n, blk, inv](TapeT& t, const Tensor& g) {
            Tensor& dx = t.grad_buf(x_id);
            for (int i = 0; i < n; ++i) {
                T* d = dx.data.data() + i * blk;
                for (std::size_t j = 0; j < blk; ++j) d[j] += inv * g.data[j];
            }
        });
    }

    // [C,H,W] -> [N,C,H,W] by repetition.
    int broadcast_batch(int x_id, int n) {
        const Tensor& x = value(x_id);
        if (x.rank() != 3) throw ShapeError("broadcast_batch expects [C,H,W]");
        if (n < 1) throw DomainError("broadcast_batch needs n >= 1");
        Tensor y(Shape{n, x.shape[0], x.shape[1], x.shape[2]});
        const std::size_t blk = x.numel();
        for (int i = 0; i < n; ++i) std::copy_n(x.data.data(), blk, y.data.data() + i * blk);
        return record(std::move(y), {x_id}, [x_id, n, blk](TapeT& t, const Tensor& g) {
            Tensor& dx = t.grad_buf(x_id);
            for (int i = 0; i < n; ++i) {
                const T* gi = g.data.data() + i * blk;
                for (std::size_t j = 0; j < blk; ++j) dx.data[j] += gi[j];
            }
        });
    }

    int stack_batch(const std::vector<int>& ids) {
        if (ids.empty()) throw DomainError("stack_batch of empty list");
        const Tensor& first = value(ids[0]);
        if (first.rank() != 3) throw ShapeError("stack_batch expects [C,H,W] elements");
        for (int id : ids)
            if (value(id).shape != first.shape) throw ShapeError("stack_batch shape mismatch");
        const int n = static_cast<int>(ids.size());
        const std::size_t blk = first.numel();
        Tensor y(Shape{n, first.shape[0], first.shape[1], first.shape[2]});
        for (int i = 0; i < n; ++i)
            std::copy_n(value(ids[i]).data.data(), blk, y.data.data() + i * blk);
        return record(std::move(y), ids, [ids, blk](TapeT& t, const Tensor& g) {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                Tensor& d = t.grad_buf(ids[i]);
                const T* gi = g.data.data() + i * blk;
                for (std::size_t j = 0; j < blk; ++j) d.data[j] += gi[j];
            }
        });
    }

    int index_batch(int x_id, int i) {
        const Tensor& x = value(x_id);
        if (x.rank() != 4) throw ShapeError("index_batch expects [N,C,H,W]");
        if (i < 0 || i >= x.shape[0]) throw DomainError("index_batch out of range");
        const std::size_t blk = x.numel() / x.shape[0];
        Tensor y(Shape{x.shape[1], x.shape[2], x.shape[3]});
        std::copy_n(x.data.data() + i * blk, blk, y.data.data());
        return record(std::move(y), {x_id}, [x_id, i, blk](TapeT& t, const Tensor& g) {
            Tensor& dx = t.grad_buf(x_id);
            T* d = dx.data.data() + i * blk;
            for (std::size_t j = 0; j < blk; ++j) d[j] += g.data[j];
        });
    }

    int sigmoid(int x_id) {
        const Tensor& x = value(x_id);
        Tensor y = x;
        for (T& v : y.data) v = T(1) / (T(1) + std::exp(-v));
        const int out = record(std::move(y), {x_id}, nullptr);
        nodes_[out].backward = [x_id, out](TapeT& t, const Tensor& g) {
            const Tensor& s = t.value(out);
            Tensor& dx = t.grad_buf(x_id);
            for (std::size_t i = 0; i < s.data.size(); ++i)
                dx.data[i] += g.data[i] * s.data[i] * (T(1) - s.data[i]);
        };
        return out;
    }

    int add(int a_id, int b_id) {
        const Tensor& a = value(a_id);
        const Tensor& b = value(b_id);
        if (a.shape != b.shape) throw ShapeError("add shape mismatch");
        Tensor y = a;
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.data[i];
        return record(std::move(y), {a_id, b_id}, [a_id, b_id](TapeT& t, const Tensor& g) {
            Tensor& da = t.grad_buf(a_id);
            Tensor& db = t.grad_buf(b_id);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                da.data[i] += g.data[i];
                db.data[i] += g.data[i];
            }
        });
    }

    int mul(int a_id, int b_id) {
        const Tensor& a = value(a_id);
        const Tensor& b = value(b_id);
        if (a.shape != b.shape) throw ShapeError("mul shape mismatch");
        Tensor y = a;
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= b.data[i];
        return record(std::move(y), {a_id, b_id}, [a_id, b_id](TapeT& t, const Tensor& g) {
            const Tensor& a = t.value(a_id);
            const Tensor& b = t.value(b_id);
            Tensor& da = t.grad_buf(a_id);
            Tensor& db = t.grad_buf(b_id);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                da.data[i] += g.data[i] * b.data[i];
                db.data[i] += g.data[i] * a.data[i];
            }
        });
    }

    int scale(int x_id, T s) {
        Tensor y = value(x_id);
        for (T& v : y.data) v *= s;
        return record(std::move(y), {x_id}, [x_id, s](TapeT& t, const Tensor& g) {
            Tensor& dx = t.grad_buf(x_id);
            for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += s * g.data[i];
        });
    }

    int sum(int x_id) {
        const Tensor& x = value(x_id);
        T s = T(0);
        for (T v : x.data) s += v;
        Tensor y(Shape{1});
        y.data[0] = s;
        return record(std::move(y), {x_id}, [x_id](TapeT& t, const Tensor& g) {
            Tensor& dx = t.grad_buf(x_id);
            for (T& v : dx.data) v += g.data[0];
        });
    }

    // loss = 1 - (2*sum(y*p) + eps) / (sum(y^2) + sum(p^2) + eps)
    int soft_dice_loss(int pred_id, int target_id, T eps = T(1e-6)) {
        const Tensor& p = value(pred_id);
        const Tensor& y = value(target_id);
        if (p.shape != y.shape) throw ShapeError("soft_dice_loss shape mismatch");
        T inter = T(0), pp = T(0), yy = T(0);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            inter += p.data[i] * y.data[i];
            pp += p.data[i] * p.data[i];
            yy += y.data[i] * y.data[i];
        }
        const T num = T(2) * inter + eps;
        const T den = yy + pp + eps;
        Tensor out(Shape{1});
        out.data[0] = T(1) - num / den;
        return record(std::move(out), {pred_id, target_id},
                      [pred_id, target_id, num, den](TapeT& t, const Tensor& g) {
                          const Tensor& p = t.value(pred_id);
                          const Tensor& y = t.value(target_id);
                          Tensor& dp = t.grad_buf(pred_id);
                          Tensor& dy = t.grad_buf(target_id);
                          const T d2 = den * den;
                          for (std::size_t i = 0; i < p.data.size(); ++i) {
                              dp.data[i] -= g.data[0] * (T(2) * y.data[i] * den - num * T(2) * p.data[i]) / d2;
                              dy.data[i] -= g.data[0] * (T(2) * p.data[i] * den - num * T(2) * y.data[i]) / d2;
                          }
                      });
    }

    void backward(int loss_id) {
        if (nodes_.empty()) throw StateError("backward on empty tape");
        if (loss_id < 0 || loss_id >= static_cast<int>(nodes_.size()))
            throw StateError("backward: unknown node");
        if (value(loss_id).numel() != 1) throw StateError("backward needs a scalar loss");
        // Fresh per-sweep buffers for interior nodes; persistent accumulation
        // into leaves only.
        sweep_grads_.assign(nodes_.size(), Tensor{});
        sweep_grads_[loss_id] = Tensor::full(value(loss_id).shape, T(1));
        in_sweep_ = true;
        for (int id = loss_id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (sweep_grads_[id].shape.empty() || !n.backward) continue;
            n.backward(*this, sweep_grads_[id]);
        }
        in_sweep_ = false;
        for (std::size_t id = 0; id < nodes_.size(); ++id) {
            if (!nodes_[id].is_leaf) continue;
            Node& n = nodes_[id];
            if (n.grad.shape.empty()) n.grad = Tensor(n.value.shape);
            if (sweep_grads_[id].shape.empty()) continue;  // unreached leaf: stays zero
            for (std::size_t j = 0; j < n.grad.data.size(); ++j)
                n.grad.data[j] += sweep_grads_[id].data[j];
        }
        sweep_grads_.clear();
    }

    void zero_grad() {
        for (Node& n : nodes_) n.grad = Tensor{};
    }

    // Digest of the sign pattern seen by every leaky_relu so far. Two forward
    // passes with equal hashes stayed on the same smooth piece of the
    // function, which is what a finite-difference stencil needs.
    std::uint64_t activation_sign_hash() const { return act_sign_hash_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // leaves only, persistent across backward calls
        std::vector<int> parents;
        std::function<void(TapeT&, const Tensor&)> backward;
        bool is_leaf = false;
    };

    struct ResizeSample {
        std::size_t i00, i01, i10, i11;
        double w00, w01, w10, w11;
    };

    static std::vector<ResizeSample> resize_samples(int h, int w, int out_h, int out_w) {
        std::vector<ResizeSample> out(static_cast<std::size_t>(out_h) * out_w);
        const double sy = static_cast<double>(h) / out_h;
        const double sx = static_cast<double>(w) / out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            double fy = (oy + 0.5) * sy - 0.5;
            const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, h - 1);
            const int y1 = std::min(y0 + 1, h - 1);
            const double wy = std::clamp(fy - std::floor(fy), 0.0, 1.0) * (fy >= 0 ? 1.0 : 0.0);
            for (int ox = 0; ox < out_w; ++ox) {
                double fx = (ox + 0.5) * sx - 0.5;
                const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, w - 1);
                const int x1 = std::min(x0 + 1, w - 1);
                const double wx = std::clamp(fx - std::floor(fx), 0.0, 1.0) * (fx >= 0 ? 1.0 : 0.0);
                ResizeSample& s = out[static_cast<std::size_t>(oy) * out_w + ox];
                s.i00 = static_cast<std::size_t>(y0) * w + x0;
                s.i01 = static_cast<std::size_t>(y0) * w + x1;
                s.i10 = static_cast<std::size_t>(y1) * w + x0;
                s.i11 = static_cast<std::size_t>(y1) * w + x1;
                s.w00 = (1 - wy) * (1 - wx);
                s.w01 = (1 - wy) * wx;
                s.w10 = wy * (1 - wx);
                s.w11 = wy * wx;
            }
        }
        return out;
    }

    int record(Tensor value, std::vector<int> parents,
               std::function<void(TapeT&, const Tensor&)> bwd) {
        for (int p : parents)
            if (p < 0 || p >= static_cast<int>(nodes_.size()))
                throw StateError("operation references unknown node");
        nodes_.push_back(Node{std::move(value), {}, std::move(parents), std::move(bwd), false});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Tensor& grad_buf(int id) {
        if (!in_sweep_) throw StateError("grad_buf outside backward sweep");
        Tensor& g = sweep_grads_[id];
        if (g.shape.empty()) g = Tensor(nodes_[id].value.shape);
        return g;
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> sweep_grads_;
    std::uint64_t act_sign_hash_ = 1469598103934665603ULL;
    bool in_sweep_ = false;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace uvsg
