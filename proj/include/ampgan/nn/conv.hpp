#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/rng.hpp"
#include "ampgan/tensor.hpp"

namespace ampgan::nn {

enum class Norm { none, weight, spectral };

template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value;
    std::vector<T>* grad;
};

template <typename T>
struct StateRef {
    std::string name;
    std::vector<T>* value;
};

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using MatXR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// 1-D convolution with optional weight normalization (magnitude/direction)
// or spectral normalization (power iteration, persistent vectors).
// Forward calls push onto a cache stack and backward pops, so a layer can be
// run several times per step (real pass, fake pass) and backpropagated in
// reverse order.
template <typename T>
struct Conv1d {
    int c_in = 0, c_out = 0, k = 1, stride = 1, dilation = 1, groups = 1;
    int pad_l = 0, pad_r = 0;
    Norm norm = Norm::none;
    bool prefer_gemm = true;

    // weight is the direction tensor under weight norm, the raw weight
    // otherwise; layout [c_out][c_in/groups][k], row-major.
    std::vector<T> weight, mag, bias;
    std::vector<T> gweight, gmag, gbias;
    // spectral norm state
    std::vector<T> sn_u, sn_v;

    struct Cache {
        Tensor<T> x;
        T sigma = T{1};
        std::vector<T> u, v;  // power-iteration vectors used by this pass
    };
    std::vector<Cache> cache;

    static Conv1d make(int c_in, int c_out, int k, int stride, int dilation, int groups,
                       int pad_l, int pad_r, Norm norm, Rng& rng, double init_scale = 1.0) {
        if (c_in <= 0 || c_out <= 0) throw ConfigError("conv1d: non-positive channel count");
        if (c_in % groups != 0 || c_out % groups != 0)
            throw ConfigError("conv1d: channels not divisible by groups");
        Conv1d c;
        c.c_in = c_in;
        c.c_out = c_out;
        c.k = k;
        c.stride = stride;
        c.dilation = dilation;
        c.groups = groups;
        c.pad_l = pad_l;
        c.pad_r = pad_r;
        c.norm = norm;
        const std::size_t slice = static_cast<std::size_t>(c_in / groups) * k;
        c.weight.resize(static_cast<std::size_t>(c_out) * slice);
        c.bias.assign(static_cast<std::size_t>(c_out), T{0});
        const double std_dev = init_scale * std::sqrt(2.0 / static_cast<double>(slice));
        for (auto& w : c.weight) w = static_cast<T>(rng.normal() * std_dev);
        if (norm == Norm::weight) {
            c.mag.resize(static_cast<std::size_t>(c_out));
            for (int o = 0; o < c_out; ++o) {
                double n2 = 0.0;
                for (std::size_t i = 0; i < slice; ++i) {
                    const T w = c.weight[o * slice + i];
                    n2 += static_cast<double>(w) * w;
                }
                c.mag[static_cast<std::size_t>(o)] = static_cast<T>(std::sqrt(n2));
            }
        } else if (norm == Norm::spectral) {
            c.sn_u.resize(static_cast<std::size_t>(c_out));
            c.sn_v.resize(slice);
            for (auto& u : c.sn_u) u = static_cast<T>(rng.normal());
            normalize_vec(c.sn_u);
            c.power_iterate(30);  // settle before first use
        }
        c.gweight.assign(c.weight.size(), T{0});
        c.gmag.assign(c.mag.size(), T{0});
        c.gbias.assign(c.bias.size(), T{0});
        return c;
    }

    std::int64_t out_len(std::int64_t in_len) const {
        return (in_len + pad_l + pad_r - static_cast<std::int64_t>(dilation) * (k - 1) - 1) /
                   stride +
               1;
    }

    std::int64_t param_count() const {
        return static_cast<std::int64_t>(weight.size() + mag.size() + bias.size());
    }

    static void normalize_vec(std::vector<T>& v) {
        double n2 = 0.0;
        for (T x : v) n2 += static_cast<double>(x) * x;
        const T inv = static_cast<T>(1.0 / std::sqrt(std::max(n2, 1e-24)));
        for (T& x : v) x *= inv;
    }

    // One u/v power-iteration update against the raw weight matrix
    // [c_out x slice]; returns the sigma estimate u^T W v.
    T power_iterate(int iterations) {
        const std::size_t slice = weight.size() / static_cast<std::size_t>(c_out);
        for (int it = 0; it < iterations; ++it) {
            // v = normalize(W^T u)
            for (std::size_t j = 0; j < slice; ++j) {
                double acc = 0.0;
                for (int o = 0; o < c_out; ++o)
                    acc += static_cast<double>(weight[o * slice + j]) * sn_u[static_cast<std::size_t>(o)];
                sn_v[j] = static_cast<T>(acc);
            }
            normalize_vec(sn_v);
            // u = normalize(W v)
            for (int o = 0; o < c_out; ++o) {
                double acc = 0.0;
                for (std::size_t j = 0; j < slice; ++j)
                    acc += static_cast<double>(weight[o * slice + j]) * sn_v[j];
                sn_u[static_cast<std::size_t>(o)] = static_cast<T>(acc);
            }
            normalize_vec(sn_u);
        }
        return current_sigma();
    }

    T current_sigma() const {
        const std::size_t slice = weight.size() / static_cast<std::size_t>(c_out);
        double acc = 0.0;
        for (int o = 0; o < c_out; ++o) {
            double row = 0.0;
            for (std::size_t j = 0; j < slice; ++j)
                row += static_cast<double>(weight[o * slice + j]) * sn_v[j];
            acc += row * sn_u[static_cast<std::size_t>(o)];
        }
        return static_cast<T>(acc);
    }

    // Effective weight for this pass. With `update_power_iter` the spectral
    // layers advance u/v by one step first.
    std::vector<T> effective_weight(bool update_power_iter, T* sigma_out = nullptr) const {
        std::vector<T> w = weight;
        const std::size_t slice = weight.size() / static_cast<std::size_t>(c_out);
        if (norm == Norm::weight) {
            for (int o = 0; o < c_out; ++o) {
                double n2 = 0.0;
                for (std::size_t i = 0; i < slice; ++i)
                    n2 += static_cast<double>(weight[o * slice + i]) * weight[o * slice + i];
                const T scale = static_cast<T>(static_cast<double>(mag[static_cast<std::size_t>(o)]) /
                                               std::sqrt(std::max(n2, 1e-24)));
                for (std::size_t i = 0; i < slice; ++i) w[o * slice + i] *= scale;
            }
        } else if (norm == Norm::spectral) {
            Conv1d* self = const_cast<Conv1d*>(this);
            if (update_power_iter) self->power_iterate(1);
            const T sigma = current_sigma();
            if (sigma_out) *sigma_out = sigma;
            const T inv = static_cast<T>(1.0 / static_cast<double>(sigma));
            for (T& x : w) x *= inv;
        }
        return w;
    }

    Tensor<T> forward(const Tensor<T>& x, bool update_power_iter = false) {
        if (x.rank() != 3 || x.dim(1) != c_in) throw DataError("conv1d: bad input shape");
        const std::int64_t B = x.dim(0), T_in = x.dim(2);
        const std::int64_t T_out = out_len(T_in);
        if (T_out <= 0) throw DataError("conv1d: input length " + std::to_string(T_in) +
                                        " too short for kernel " + std::to_string(k));

        Cache entry;
        entry.x = x;
        T sigma = T{1};
        const std::vector<T> w = effective_weight(update_power_iter, &sigma);
        if (norm == Norm::spectral) {
            entry.sigma = sigma;
            entry.u = sn_u;
            entry.v = sn_v;
        }
        cache.push_back(std::move(entry));

        Tensor<T> y({B, c_out, T_out});
        if (!prefer_gemm && stride == 1)
            forward_direct(x, w, y);
        else
            forward_gemm(x, w, y);
        return y;
    }

    // Backpropagate the top cache entry. Accumulates parameter gradients
    // unless `need_dw` is false; returns the input gradient when `need_dx`.
    Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true, bool need_dw = true) {
        if (cache.empty()) throw Error("conv1d: backward without matching forward");
        Cache entry = std::move(cache.back());
        cache.pop_back();
        const Tensor<T>& x = entry.x;
        const std::int64_t B = x.dim(0), T_in = x.dim(2);

        // Recompute the effective weight of that pass (parameters have not
        // changed since; spectral layers reuse the cached sigma).
        std::vector<T> w = weight;
        const std::size_t slice = weight.size() / static_cast<std::size_t>(c_out);
        std::vector<double> wn_norm(static_cast<std::size_t>(c_out), 1.0);
        if (norm == Norm::weight) {
            for (int o = 0; o < c_out; ++o) {
                double n2 = 0.0;
                for (std::size_t i = 0; i < slice; ++i)
                    n2 += static_cast<double>(weight[o * slice + i]) * weight[o * slice + i];
                wn_norm[static_cast<std::size_t>(o)] = std::sqrt(std::max(n2, 1e-24));
                const T scale = static_cast<T>(static_cast<double>(mag[static_cast<std::size_t>(o)]) /
                                               wn_norm[static_cast<std::size_t>(o)]);
                for (std::size_t i = 0; i < slice; ++i) w[o * slice + i] *= scale;
            }
        } else if (norm == Norm::spectral) {
            const T inv = static_cast<T>(1.0 / static_cast<double>(entry.sigma));
            for (T& v : w) v *= inv;
        }

        std::vector<T> dw_eff(weight.size(), T{0});
        Tensor<T> dx;
        if (need_dx) dx = Tensor<T>({B, c_in, T_in});

        if (!prefer_gemm && stride == 1)
            backward_direct(x, dy, w, dw_eff, dx, need_dx, need_dw);
        else
            backward_gemm(x, dy, w, dw_eff, dx, need_dx, need_dw);

        if (need_dw) {
            for (std::int64_t b = 0; b < B; ++b)
                for (int o = 0; o < c_out; ++o) {
                    double acc = 0.0;
                    const std::int64_t T_out = out_len(T_in);
                    for (std::int64_t t = 0; t < T_out; ++t)
                        acc += static_cast<double>(dy.at(b, o, t));
                    gbias[static_cast<std::size_t>(o)] += static_cast<T>(acc);
                }
            apply_norm_chain(dw_eff, w, entry);
        }
        return dx;
    }

    void zero_grad() {
        std::fill(gweight.begin(), gweight.end(), T{0});
        std::fill(gmag.begin(), gmag.end(), T{0});
        std::fill(gbias.begin(), gbias.end(), T{0});
    }

    void clear_cache() { cache.clear(); }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".weight", &weight, &gweight});
        if (norm == Norm::weight) out.push_back({prefix + ".mag", &mag, &gmag});
        out.push_back({prefix + ".bias", &bias, &gbias});
    }

    void collect_state(const std::string& prefix, std::vector<StateRef<T>>& out) {
        if (norm == Norm::spectral) {
            out.push_back({prefix + ".sn_u", &sn_u});
            out.push_back({prefix + ".sn_v", &sn_v});
        }
    }

  private:
    // Maps the gradient w.r.t. the effective weight back onto the stored
    // parameterization.
    void apply_norm_chain(const std::vector<T>& dw_eff, const std::vector<T>& w_eff,
                          const Cache& entry) {
        const std::size_t slice = weight.size() / static_cast<std::size_t>(c_out);
        if (norm == Norm::none) {
            for (std::size_t i = 0; i < weight.size(); ++i) gweight[i] += dw_eff[i];
        } else if (norm == Norm::weight) {
            for (int o = 0; o < c_out; ++o) {
                double n2 = 0.0;
                for (std::size_t i = 0; i < slice; ++i)
                    n2 += static_cast<double>(weight[o * slice + i]) * weight[o * slice + i];
                const double nrm = std::sqrt(std::max(n2, 1e-24));
                double dot_dw_vhat = 0.0;
                for (std::size_t i = 0; i < slice; ++i)
                    dot_dw_vhat += static_cast<double>(dw_eff[o * slice + i]) *
                                   (static_cast<double>(weight[o * slice + i]) / nrm);
                gmag[static_cast<std::size_t>(o)] += static_cast<T>(dot_dw_vhat);
                const double g_over_n = static_cast<double>(mag[static_cast<std::size_t>(o)]) / nrm;
                for (std::size_t i = 0; i < slice; ++i) {
                    const double vhat = static_cast<double>(weight[o * slice + i]) / nrm;
                    gweight[o * slice + i] += static_cast<T>(
                        g_over_n * (static_cast<double>(dw_eff[o * slice + i]) - dot_dw_vhat * vhat));
                }
            }
        } else {  // spectral: W_eff = W / sigma, sigma = u^T W v with u,v constant
            double dot = 0.0;
            for (std::size_t i = 0; i < weight.size(); ++i)
                dot += static_cast<double>(dw_eff[i]) * static_cast<double>(w_eff[i]);
            const double inv_sigma = 1.0 / static_cast<double>(entry.sigma);
            for (int o = 0; o < c_out; ++o)
                for (std::size_t j = 0; j < slice; ++j) {
                    const double uv = static_cast<double>(entry.u[static_cast<std::size_t>(o)]) *
                                      static_cast<double>(entry.v[j]);
                    gweight[o * slice + j] += static_cast<T>(
                        inv_sigma * (static_cast<double>(dw_eff[o * slice + j]) - dot * uv));
                }
        }
    }

    void forward_direct(const Tensor<T>& x, const std::vector<T>& w, Tensor<T>& y) const {
        const std::int64_t B = x.dim(0), T_in = x.dim(2), T_out = y.dim(2);
        const int cin_g = c_in / groups, cout_g = c_out / groups;
        const std::size_t slice = static_cast<std::size_t>(cin_g) * k;
        for (std::int64_t b = 0; b < B; ++b)
            for (int o = 0; o < c_out; ++o) {
                T* out_row = &y.at(b, o, 0);
                for (std::int64_t t = 0; t < T_out; ++t) out_row[t] = bias[static_cast<std::size_t>(o)];
                const int g = o / cout_g;
                for (int ci = 0; ci < cin_g; ++ci) {
                    const T* in_row = &x.at(b, g * cin_g + ci, 0);
                    for (int kk = 0; kk < k; ++kk) {
                        const T wv = w[static_cast<std::size_t>(o) * slice +
                                       static_cast<std::size_t>(ci) * k + kk];
                        const std::int64_t off = static_cast<std::int64_t>(kk) * dilation - pad_l;
                        const std::int64_t t0 = std::max<std::int64_t>(0, -off);
                        const std::int64_t t1 = std::min<std::int64_t>(T_out, T_in - off);
                        for (std::int64_t t = t0; t < t1; ++t) out_row[t] += wv * in_row[t + off];
                    }
                }
            }
    }

    void backward_direct(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<T>& w,
                         std::vector<T>& dw_eff, Tensor<T>& dx, bool need_dx, bool need_dw) const {
        const std::int64_t B = x.dim(0), T_in = x.dim(2), T_out = dy.dim(2);
        const int cin_g = c_in / groups, cout_g = c_out / groups;
        const std::size_t slice = static_cast<std::size_t>(cin_g) * k;
        for (std::int64_t b = 0; b < B; ++b)
            for (int o = 0; o < c_out; ++o) {
                const int g = o / cout_g;
                const T* dy_row = &dy.at(b, o, 0);
                for (int ci = 0; ci < cin_g; ++ci) {
                    const T* in_row = &x.at(b, g * cin_g + ci, 0);
                    T* dx_row = need_dx ? &dx.at(b, g * cin_g + ci, 0) : nullptr;
                    for (int kk = 0; kk < k; ++kk) {
                        const std::int64_t off = static_cast<std::int64_t>(kk) * dilation - pad_l;
                        const std::int64_t t0 = std::max<std::int64_t>(0, -off);
                        const std::int64_t t1 = std::min<std::int64_t>(T_out, T_in - off);
                        if (need_dw) {
                            double acc = 0.0;
                            for (std::int64_t t = t0; t < t1; ++t)
                                acc += static_cast<double>(dy_row[t]) * in_row[t + off];
                            dw_eff[static_cast<std::size_t>(o) * slice +
                                   static_cast<std::size_t>(ci) * k + kk] += static_cast<T>(acc);
                        }
                        if (need_dx) {
                            const T wv = w[static_cast<std::size_t>(o) * slice +
                                           static_cast<std::size_t>(ci) * k + kk];
                            for (std::int64_t t = t0; t < t1; ++t) dx_row[t + off] += wv * dy_row[t];
                        }
                    }
                }
            }
    }

    void im2col(const Tensor<T>& x, std::int64_t b, int g, MatX<T>& col) const {
        const std::int64_t T_in = x.dim(2);
        const std::int64_t T_out = col.cols();
        const int cin_g = c_in / groups;
        for (int ci = 0; ci < cin_g; ++ci) {
            const T* in_row = &x.at(b, g * cin_g + ci, 0);
            for (int kk = 0; kk < k; ++kk) {
                const std::int64_t row = static_cast<std::int64_t>(ci) * k + kk;
                for (std::int64_t t = 0; t < T_out; ++t) {
                    const std::int64_t idx =
                        t * stride + static_cast<std::int64_t>(kk) * dilation - pad_l;
                    col(row, t) = (idx >= 0 && idx < T_in) ? in_row[idx] : T{0};
                }
            }
        }
    }

    void forward_gemm(const Tensor<T>& x, const std::vector<T>& w, Tensor<T>& y) const {
        const std::int64_t B = x.dim(0), T_out = y.dim(2);
        const int cin_g = c_in / groups, cout_g = c_out / groups;
        const std::size_t slice = static_cast<std::size_t>(cin_g) * k;
        MatX<T> col(slice, T_out);
        for (std::int64_t b = 0; b < B; ++b)
            for (int g = 0; g < groups; ++g) {
                im2col(x, b, g, col);
                Eigen::Map<const MatXR<T>> wmat(w.data() + static_cast<std::size_t>(g) * cout_g * slice,
                                                cout_g, static_cast<std::int64_t>(slice));
                MatX<T> out = wmat * col;
                for (int ol = 0; ol < cout_g; ++ol) {
                    T* dst = &y.at(b, g * cout_g + ol, 0);
                    const T bv = bias[static_cast<std::size_t>(g * cout_g + ol)];
                    for (std::int64_t t = 0; t < T_out; ++t) dst[t] = out(ol, t) + bv;
                }
            }
    }

    void backward_gemm(const Tensor<T>& x, const Tensor<T>& dy, const std::vector<T>& w,
                       std::vector<T>& dw_eff, Tensor<T>& dx, bool need_dx, bool need_dw) const {
        const std::int64_t B = x.dim(0), T_in = x.dim(2), T_out = dy.dim(2);
        const int cin_g = c_in / groups, cout_g = c_out / groups;
        const std::size_t slice = static_cast<std::size_t>(cin_g) * k;
        MatX<T> col(slice, T_out);
        MatX<T> dy_mat(cout_g, T_out);
        for (std::int64_t b = 0; b < B; ++b)
            for (int g = 0; g < groups; ++g) {
                for (int ol = 0; ol < cout_g; ++ol) {
                    const T* src = &dy.at(b, g * cout_g + ol, 0);
                    for (std::int64_t t = 0; t < T_out; ++t) dy_mat(ol, t) = src[t];
                }
                if (need_dw) {
                    im2col(x, b, g, col);
                    MatX<T> dw = dy_mat * col.transpose();
                    T* dst = dw_eff.data() + static_cast<std::size_t>(g) * cout_g * slice;
                    for (int ol = 0; ol < cout_g; ++ol)
                        for (std::size_t j = 0; j < slice; ++j)
                            dst[static_cast<std::size_t>(ol) * slice + j] += dw(ol, static_cast<std::int64_t>(j));
                }
                if (need_dx) {
                    Eigen::Map<const MatXR<T>> wmat(
                        w.data() + static_cast<std::size_t>(g) * cout_g * slice, cout_g,
                        static_cast<std::int64_t>(slice));
                    MatX<T> dcol = wmat.transpose() * dy_mat;
                    for (int ci = 0; ci < cin_g; ++ci) {
                        T* dx_row = &dx.at(b, g * cin_g + ci, 0);
                        for (int kk = 0; kk < k; ++kk) {
                            const std::int64_t row = static_cast<std::int64_t>(ci) * k + kk;
                            for (std::int64_t t = 0; t < T_out; ++t) {
                                const std::int64_t idx =
                                    t * stride + static_cast<std::int64_t>(kk) * dilation - pad_l;
                                if (idx >= 0 && idx < T_in) dx_row[idx] += dcol(row, t);
                            }
                        }
                    }
                }
            }
    }
};

}  // namespace ampgan::nn
