#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ampgan/nn/conv.hpp"

namespace ampgan::nn {

// 2-D convolution over [B, C, H, W] maps for the period discriminators.
// Same normalization and cache-stack contract as Conv1d.
template <typename T>
struct Conv2d {
    int c_in = 0, c_out = 0, kh = 1, kw = 1, sh = 1, sw = 1, ph = 0, pw = 0;
    Norm norm = Norm::none;

    std::vector<T> weight, mag, bias;  // weight layout [c_out][c_in][kh][kw]
    std::vector<T> gweight, gmag, gbias;
    std::vector<T> sn_u, sn_v;

    struct Cache {
        Tensor<T> x;
        T sigma = T{1};
        std::vector<T> u, v;
    };
    std::vector<Cache> cache;

    static Conv2d make(int c_in, int c_out, int kh, int kw, int sh, int sw, int ph, int pw,
                       Norm norm, Rng& rng, double init_scale = 1.0) {
        if (c_in <= 0 || c_out <= 0) throw ConfigError("conv2d: non-positive channel count");
        Conv2d c;
        c.c_in = c_in;
        c.c_out = c_out;
        c.kh = kh;
        c.kw = kw;
        c.sh = sh;
        c.sw = sw;
        c.ph = ph;
        c.pw = pw;
        c.norm = norm;
        const std::size_t slice = static_cast<std::size_t>(c_in) * kh * kw;
        c.weight.resize(static_cast<std::size_t>(c_out) * slice);
        c.bias.assign(static_cast<std::size_t>(c_out), T{0});
        const double std_dev = init_scale * std::sqrt(2.0 / static_cast<double>(slice));
        for (auto& w : c.weight) w = static_cast<T>(rng.normal() * std_dev);
        if (norm == Norm::weight) {
            c.mag.resize(static_cast<std::size_t>(c_out));
            for (int o = 0; o < c_out; ++o) {
                double n2 = 0.0;
                for (std::size_t i = 0; i < slice; ++i)
                    n2 += static_cast<double>(c.weight[o * slice + i]) * c.weight[o * slice + i];
                c.mag[static_cast<std::size_t>(o)] = static_cast<T>(std::sqrt(n2));
            }
        } else if (norm == Norm::spectral) {
            c.sn_u.resize(static_cast<std::size_t>(c_out));
            c.sn_v.resize(slice);
            for (auto& u : c.sn_u) u = static_cast<T>(rng.normal());
            Conv1d<T>::normalize_vec(c.sn_u);
            c.power_iterate(30);
        }
        c.gweight.assign(c.weight.size(), T{0});
        c.gmag.assign(c.mag.size(), T{0});
        c.gbias.assign(c.bias.size(), T{0});
        return c;
    }

    std::int64_t out_h(std::int64_t h) const { return (h + 2 * ph - kh) / sh + 1; }
    std::int64_t out_w(std::int64_t w) const { return (w + 2 * pw - kw) / sw + 1; }

    std::int64_t param_count() const {
        return static_cast<std::int64_t>(weight.size() + mag.size() + bias.size());
    }

    T power_iterate(int iterations) {
        const std::size_t slice = weight.size() / static_cast<std::size_t>(c_out);
        for (int it = 0; it < iterations; ++it) {
            for (std::size_t j = 0; j < slice; ++j) {
                double acc = 0.0;
                for (int o = 0; o < c_out; ++o)
                    acc += static_cast<double>(weight[o * slice + j]) * sn_u[static_cast<std::size_t>(o)];
                sn_v[j] = static_cast<T>(acc);
            }
            Conv1d<T>::normalize_vec(sn_v);
            for (int o = 0; o < c_out; ++o) {
                double acc = 0.0;
                for (std::size_t j = 0; j < slice; ++j)
                    acc += static_cast<double>(weight[o * slice + j]) * sn_v[j];
                sn_u[static_cast<std::size_t>(o)] = static_cast<T>(acc);
            }
            Conv1d<T>::normalize_vec(sn_u);
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
            Conv2d* self = const_cast<Conv2d*>(this);
            if (update_power_iter) self->power_iterate(1);
            const T sigma = current_sigma();
            if (sigma_out) *sigma_out = sigma;
            const T inv = static_cast<T>(1.0 / static_cast<double>(sigma));
            for (T& x : w) x *= inv;
        }
        return w;
    }

    Tensor<T> forward(const Tensor<T>& x, bool update_power_iter = false) {
        if (x.rank() != 4 || x.dim(1) != c_in) throw DataError("conv2d: bad input shape");
        const std::int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
        const std::int64_t Ho = out_h(H), Wo = out_w(W);
        if (Ho <= 0 || Wo <= 0) throw DataError("conv2d: input too small for kernel");

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

        Tensor<T> y({B, c_out, Ho, Wo});
        const std::size_t slice = static_cast<std::size_t>(c_in) * kh * kw;
        MatX<T> col(slice, Ho * Wo);
        for (std::int64_t b = 0; b < B; ++b) {
            im2col(x, b, col, Ho, Wo);
            Eigen::Map<const MatXR<T>> wmat(w.data(), c_out, static_cast<std::int64_t>(slice));
            MatX<T> out = wmat * col;
            for (int o = 0; o < c_out; ++o) {
                T* dst = &y.at(b, o, 0, 0);
                const T bv = bias[static_cast<std::size_t>(o)];
                for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] = out(o, i) + bv;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true, bool need_dw = true) {
        if (cache.empty()) throw Error("conv2d: backward without matching forward");
        Cache entry = std::move(cache.back());
        cache.pop_back();
        const Tensor<T>& x = entry.x;
        const std::int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
        const std::int64_t Ho = dy.dim(2), Wo = dy.dim(3);
        const std::size_t slice = static_cast<std::size_t>(c_in) * kh * kw;

        std::vector<T> w = weight;
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
            const T inv = static_cast<T>(1.0 / static_cast<double>(entry.sigma));
            for (T& v : w) v *= inv;
        }

        std::vector<T> dw_eff(weight.size(), T{0});
        Tensor<T> dx;
        if (need_dx) dx = Tensor<T>({B, c_in, H, W});

        MatX<T> col(slice, Ho * Wo);
        MatX<T> dy_mat(c_out, Ho * Wo);
        for (std::int64_t b = 0; b < B; ++b) {
            for (int o = 0; o < c_out; ++o) {
                const T* src = &dy.at(b, o, 0, 0);
                for (std::int64_t i = 0; i < Ho * Wo; ++i) dy_mat(o, i) = src[i];
            }
            if (need_dw) {
                im2col(x, b, col, Ho, Wo);
                MatX<T> dw = dy_mat * col.transpose();
                for (int o = 0; o < c_out; ++o)
                    for (std::size_t j = 0; j < slice; ++j)
                        dw_eff[static_cast<std::size_t>(o) * slice + j] +=
                            dw(o, static_cast<std::int64_t>(j));
            }
            if (need_dx) {
                Eigen::Map<const MatXR<T>> wmat(w.data(), c_out, static_cast<std::int64_t>(slice));
                MatX<T> dcol = wmat.transpose() * dy_mat;
                col2im_add(dcol, b, dx, Ho, Wo);
            }
        }

        if (need_dw) {
            for (std::int64_t b = 0; b < B; ++b)
                for (int o = 0; o < c_out; ++o) {
                    double acc = 0.0;
                    const T* src = &dy.at(b, o, 0, 0);
                    for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += static_cast<double>(src[i]);
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
        } else {
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

    void im2col(const Tensor<T>& x, std::int64_t b, MatX<T>& col, std::int64_t Ho,
                std::int64_t Wo) const {
        const std::int64_t H = x.dim(2), W = x.dim(3);
        for (int ci = 0; ci < c_in; ++ci)
            for (int ih = 0; ih < kh; ++ih)
                for (int iw = 0; iw < kw; ++iw) {
                    const std::int64_t row =
                        (static_cast<std::int64_t>(ci) * kh + ih) * kw + iw;
                    for (std::int64_t oh = 0; oh < Ho; ++oh) {
                        const std::int64_t hh = oh * sh + ih - ph;
                        for (std::int64_t ow = 0; ow < Wo; ++ow) {
                            const std::int64_t ww = ow * sw + iw - pw;
                            col(row, oh * Wo + ow) =
                                (hh >= 0 && hh < H && ww >= 0 && ww < W) ? x.at(b, ci, hh, ww) : T{0};
                        }
                    }
                }
    }

    void col2im_add(const MatX<T>& dcol, std::int64_t b, Tensor<T>& dx, std::int64_t Ho,
                    std::int64_t Wo) const {
        const std::int64_t H = dx.dim(2), W = dx.dim(3);
        for (int ci = 0; ci < c_in; ++ci)
            for (int ih = 0; ih < kh; ++ih)
                for (int iw = 0; iw < kw; ++iw) {
                    const std::int64_t row =
                        (static_cast<std::int64_t>(ci) * kh + ih) * kw + iw;
                    for (std::int64_t oh = 0; oh < Ho; ++oh) {
                        const std::int64_t hh = oh * sh + ih - ph;
                        if (hh < 0 || hh >= H) continue;
                        for (std::int64_t ow = 0; ow < Wo; ++ow) {
                            const std::int64_t ww = ow * sw + iw - pw;
                            if (ww >= 0 && ww < W) dx.at(b, ci, hh, ww) += dcol(row, oh * Wo + ow);
                        }
                    }
                }
    }
};

}  // namespace ampgan::nn
