#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/nn/conv.hpp"
#include "ampgan/nn/conv2d.hpp"
#include "ampgan/nn/ops.hpp"
#include "ampgan/rng.hpp"
#include "ampgan/tensor.hpp"

namespace ampgan {

struct MsdLayerSpec {
    int c_in, c_out, k, stride, groups, pad;
};
struct MpdLayerSpec {
    int c_in, c_out, kh, kw, sh, sw, ph, pw;
};

// Scale discriminator body. The final 1-channel projection (kernel 3,
// stride 1, padding 1) is appended behind the tabulated body layers.
inline const std::vector<MsdLayerSpec>& msd_body_spec() {
    static const std::vector<MsdLayerSpec> spec = {
        {1, 128, 15, 1, 1, 0},      {128, 128, 41, 2, 4, 20},  {128, 256, 41, 2, 16, 20},
        {256, 512, 41, 4, 16, 20},  {512, 1024, 41, 4, 16, 20}, {1024, 1024, 41, 1, 16, 20},
        {1024, 1024, 5, 1, 2, 0}};
    return spec;
}
inline MsdLayerSpec msd_head_spec() { return {1024, 1, 3, 1, 1, 1}; }

// Period discriminator body; kernels act along the frame (time) axis of the
// (T/P, P) map. The final projection keeps the tabulated kernel/padding but
// runs at stride (1,1).
inline const std::vector<MpdLayerSpec>& mpd_body_spec() {
    static const std::vector<MpdLayerSpec> spec = {{1, 32, 5, 1, 3, 1, 2, 0},
                                                   {32, 128, 5, 1, 3, 1, 2, 0},
                                                   {128, 512, 5, 1, 3, 1, 2, 0},
                                                   {512, 1024, 5, 1, 3, 1, 2, 0},
                                                   {1024, 1024, 5, 1, 1, 1, 2, 0}};
    return spec;
}
inline MpdLayerSpec mpd_head_spec() { return {1024, 1, 1, 1, 1, 1, 2, 0}; }

inline const std::vector<int>& mpd_periods() {
    static const std::vector<int> p = {2, 3, 5, 7, 11};
    return p;
}

template <typename T>
struct MsdSub {
    std::string name;
    std::vector<nn::Conv1d<T>> convs;
    nn::Conv1d<T> head;
    std::vector<nn::LeakyReLU<T>> acts;

    static MsdSub make(const std::string& name, const std::vector<MsdLayerSpec>& body,
                       const MsdLayerSpec& head_spec, nn::Norm norm, Rng& rng) {
        MsdSub s;
        s.name = name;
        for (const auto& l : body) {
            s.convs.push_back(nn::Conv1d<T>::make(l.c_in, l.c_out, l.k, l.stride, 1, l.groups,
                                                  l.pad, l.pad, norm, rng));
            s.acts.emplace_back();
        }
        s.head = nn::Conv1d<T>::make(head_spec.c_in, head_spec.c_out, head_spec.k,
                                     head_spec.stride, 1, head_spec.groups, head_spec.pad,
                                     head_spec.pad, norm, rng);
        return s;
    }

    void check_length(std::int64_t len) const {
        for (std::size_t i = 0; i < convs.size(); ++i) {
            len = convs[i].out_len(len);
            if (len <= 0)
                throw DataError("discriminator " + name + ": layer " + std::to_string(i + 1) +
                                " produces an empty map; input too short");
        }
        if (head.out_len(len) <= 0)
            throw DataError("discriminator " + name + ": output projection produces an empty map");
    }

    Tensor<T> forward(const Tensor<T>& x, bool update_power_iter,
                      std::vector<Tensor<T>>* features = nullptr) {
        check_length(x.dim(2));
        Tensor<T> h = x;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            h = convs[i].forward(h, update_power_iter);
            h = acts[i].forward(h);
            if (features) features->push_back(h);
        }
        return head.forward(h, update_power_iter);
    }

    Tensor<T> backward(const Tensor<T>& dlogits, bool need_dx, bool need_dw,
                       const std::vector<Tensor<T>>* dfeatures = nullptr) {
        Tensor<T> dh = head.backward(dlogits, true, need_dw);
        for (std::size_t i = convs.size(); i-- > 0;) {
            if (dfeatures) {
                const Tensor<T>& extra = (*dfeatures)[i];
                for (std::size_t j = 0; j < dh.data.size(); ++j) dh.data[j] += extra.data[j];
            }
            dh = acts[i].backward(dh);
            dh = convs[i].backward(dh, need_dx || i > 0, need_dw);
        }
        return dh;
    }

    void zero_grad() {
        for (auto& c : convs) c.zero_grad();
        head.zero_grad();
    }
    void clear_cache() {
        for (auto& c : convs) c.clear_cache();
        for (auto& a : acts) a.clear_cache();
        head.clear_cache();
    }
    std::int64_t param_count() const {
        std::int64_t n = head.param_count();
        for (const auto& c : convs) n += c.param_count();
        return n;
    }
    void collect_params(std::vector<nn::ParamRef<T>>& out) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect_params(name + ".conv" + std::to_string(i), out);
        head.collect_params(name + ".head", out);
    }
    void collect_state(std::vector<nn::StateRef<T>>& out) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect_state(name + ".conv" + std::to_string(i), out);
        head.collect_state(name + ".head", out);
    }
};

template <typename T>
struct MpdSub {
    std::string name;
    int period = 1;
    std::vector<nn::Conv2d<T>> convs;
    nn::Conv2d<T> head;
    std::vector<nn::LeakyReLU<T>> acts;
    std::vector<std::int64_t> pass_lengths;  // original T per forward pass

    static MpdSub make(const std::string& name, int period,
                       const std::vector<MpdLayerSpec>& body, const MpdLayerSpec& head_spec,
                       nn::Norm norm, Rng& rng) {
        MpdSub s;
        s.name = name;
        s.period = period;
        for (const auto& l : body) {
            s.convs.push_back(nn::Conv2d<T>::make(l.c_in, l.c_out, l.kh, l.kw, l.sh, l.sw, l.ph,
                                                  l.pw, norm, rng));
            s.acts.emplace_back();
        }
        s.head = nn::Conv2d<T>::make(head_spec.c_in, head_spec.c_out, head_spec.kh, head_spec.kw,
                                     head_spec.sh, head_spec.sw, head_spec.ph, head_spec.pw, norm,
                                     rng);
        return s;
    }

    Tensor<T> forward(const Tensor<T>& x, bool update_power_iter,
                      std::vector<Tensor<T>>* features = nullptr) {
        pass_lengths.push_back(x.dim(2));
        Tensor<T> h = nn::reshape_for_period(x, period);
        for (std::size_t i = 0; i < convs.size(); ++i) {
            h = convs[i].forward(h, update_power_iter);
            h = acts[i].forward(h);
            if (features) features->push_back(h);
        }
        return head.forward(h, update_power_iter);
    }

    Tensor<T> backward(const Tensor<T>& dlogits, bool need_dx, bool need_dw,
                       const std::vector<Tensor<T>>* dfeatures = nullptr) {
        if (pass_lengths.empty()) throw Error("mpd: backward without forward");
        const std::int64_t in_len = pass_lengths.back();
        pass_lengths.pop_back();
        Tensor<T> dh = head.backward(dlogits, true, need_dw);
        for (std::size_t i = convs.size(); i-- > 0;) {
            if (dfeatures) {
                const Tensor<T>& extra = (*dfeatures)[i];
                for (std::size_t j = 0; j < dh.data.size(); ++j) dh.data[j] += extra.data[j];
            }
            dh = acts[i].backward(dh);
            dh = convs[i].backward(dh, need_dx || i > 0, need_dw);
        }
        if (!need_dx) return Tensor<T>();
        return nn::reshape_for_period_backward(dh, in_len);
    }

    void zero_grad() {
        for (auto& c : convs) c.zero_grad();
        head.zero_grad();
    }
    void clear_cache() {
        for (auto& c : convs) c.clear_cache();
        for (auto& a : acts) a.clear_cache();
        head.clear_cache();
        pass_lengths.clear();
    }
    std::int64_t param_count() const {
        std::int64_t n = head.param_count();
        for (const auto& c : convs) n += c.param_count();
        return n;
    }
    void collect_params(std::vector<nn::ParamRef<T>>& out) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect_params(name + ".conv" + std::to_string(i), out);
        head.collect_params(name + ".head", out);
    }
    void collect_state(std::vector<nn::StateRef<T>>& out) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect_state(name + ".conv" + std::to_string(i), out);
        head.collect_state(name + ".head", out);
    }
};

// Per sub-discriminator, one unbounded logit map: 1-D over time for the two
// scale subs, 2-D over (T/P, P) frames for the five period subs.
template <typename T>
struct LogitMaps {
    std::vector<Tensor<T>> maps;
    std::size_t count() const { return maps.size(); }

    bool all_finite() const {
        for (const auto& m : maps)
            if (!m.all_finite()) return false;
        return true;
    }
};

// The paper-configured ensemble: two scale subs (raw input under spectral
// norm, x4 average-pooled input under weight norm) and five period subs
// (weight norm, P = 2,3,5,7,11). The MPD block can be omitted for the
// MSD-only ablation.
template <typename T>
struct DiscriminatorEnsemble {
    MsdSub<T> msd_raw, msd_pooled;
    std::vector<MpdSub<T>> mpd;
    std::vector<std::int64_t> pooled_pass_lengths;

    static DiscriminatorEnsemble build(Rng& rng, bool include_mpd = true) {
        DiscriminatorEnsemble e;
        e.msd_raw = MsdSub<T>::make("msd.raw", msd_body_spec(), msd_head_spec(),
                                    nn::Norm::spectral, rng);
        e.msd_pooled = MsdSub<T>::make("msd.pooled", msd_body_spec(), msd_head_spec(),
                                       nn::Norm::weight, rng);
        if (include_mpd)
            for (int p : mpd_periods())
                e.mpd.push_back(MpdSub<T>::make("mpd.p" + std::to_string(p), p, mpd_body_spec(),
                                                mpd_head_spec(), nn::Norm::weight, rng));
        return e;
    }

    // Tiny configuration with the same topology (2 scale + 5 period subs,
    // two layers each) for gradient checks and fast tests.
    static DiscriminatorEnsemble build_micro(Rng& rng, bool include_mpd = true) {
        DiscriminatorEnsemble e;
        const std::vector<MsdLayerSpec> msd_body = {{1, 4, 5, 2, 1, 2}};
        const MsdLayerSpec msd_head = {4, 1, 3, 1, 1, 1};
        e.msd_raw = MsdSub<T>::make("msd.raw", msd_body, msd_head, nn::Norm::spectral, rng);
        e.msd_pooled = MsdSub<T>::make("msd.pooled", msd_body, msd_head, nn::Norm::weight, rng);
        if (include_mpd) {
            const std::vector<MpdLayerSpec> mpd_body = {{1, 4, 3, 1, 2, 1, 1, 0}};
            const MpdLayerSpec mpd_head = {4, 1, 1, 1, 1, 1, 0, 0};
            for (int p : mpd_periods())
                e.mpd.push_back(
                    MpdSub<T>::make("mpd.p" + std::to_string(p), p, mpd_body, mpd_head,
                                    nn::Norm::weight, rng));
        }
        return e;
    }

    std::size_t sub_count() const { return 2 + mpd.size(); }

    LogitMaps<T> forward(const Tensor<T>& x, bool update_power_iter = false,
                         std::vector<std::vector<Tensor<T>>>* features = nullptr) {
        if (x.rank() != 3 || x.dim(1) != 1)
            throw DataError("discriminator: expected [B, 1, T] input");
        LogitMaps<T> out;
        auto next_feat = [&]() -> std::vector<Tensor<T>>* {
            if (!features) return nullptr;
            features->emplace_back();
            return &features->back();
        };

        out.maps.push_back(msd_raw.forward(x, update_power_iter, next_feat()));

        pooled_pass_lengths.push_back(x.dim(2));
        Tensor<T> pooled = nn::avg_pool_x4(x);
        out.maps.push_back(msd_pooled.forward(pooled, update_power_iter, next_feat()));

        for (auto& sub : mpd)
            out.maps.push_back(sub.forward(x, update_power_iter, next_feat()));
        return out;
    }

    // Backprop one forward pass given per-map gradients. Returns the
    // gradient w.r.t. the input waveform when `need_dx`.
    Tensor<T> backward(const std::vector<Tensor<T>>& dmaps, bool need_dx, bool need_dw,
                       const std::vector<std::vector<Tensor<T>>>* dfeatures = nullptr) {
        if (dmaps.size() != sub_count())
            throw DataError("discriminator: gradient map count mismatch");
        if (pooled_pass_lengths.empty()) throw Error("discriminator: backward without forward");
        const std::int64_t in_len = pooled_pass_lengths.back();
        pooled_pass_lengths.pop_back();

        Tensor<T> dx;
        auto add_into = [&](const Tensor<T>& g) {
            if (!need_dx) return;
            if (dx.data.empty())
                dx = g;
            else
                for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += g.data[i];
        };

        // Reverse order of the forward passes within this ensemble call.
        for (std::size_t s = mpd.size(); s-- > 0;) {
            Tensor<T> g = mpd[s].backward(dmaps[2 + s], need_dx, need_dw,
                                          dfeatures ? &(*dfeatures)[2 + s] : nullptr);
            if (need_dx) add_into(g);
        }
        {
            Tensor<T> g = msd_pooled.backward(dmaps[1], need_dx, need_dw,
                                              dfeatures ? &(*dfeatures)[1] : nullptr);
            if (need_dx) add_into(nn::avg_pool_x4_backward(g, in_len));
        }
        {
            Tensor<T> g = msd_raw.backward(dmaps[0], need_dx, need_dw,
                                           dfeatures ? &(*dfeatures)[0] : nullptr);
            if (need_dx) add_into(g);
        }
        return dx;
    }

    void zero_grad() {
        msd_raw.zero_grad();
        msd_pooled.zero_grad();
        for (auto& s : mpd) s.zero_grad();
    }
    void clear_cache() {
        msd_raw.clear_cache();
        msd_pooled.clear_cache();
        for (auto& s : mpd) s.clear_cache();
        pooled_pass_lengths.clear();
    }
    std::int64_t param_count() const {
        std::int64_t n = msd_raw.param_count() + msd_pooled.param_count();
        for (const auto& s : mpd) n += s.param_count();
        return n;
    }
    std::vector<nn::ParamRef<T>> params() {
        std::vector<nn::ParamRef<T>> out;
        msd_raw.collect_params(out);
        msd_pooled.collect_params(out);
        for (auto& s : mpd) s.collect_params(out);
        return out;
    }
    std::vector<nn::StateRef<T>> states() {
        std::vector<nn::StateRef<T>> out;
        msd_raw.collect_state(out);
        msd_pooled.collect_state(out);
        for (auto& s : mpd) s.collect_state(out);
        return out;
    }
};

}  // namespace ampgan
