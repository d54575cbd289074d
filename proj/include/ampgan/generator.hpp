#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ampgan/errors.hpp"
#include "ampgan/nn/adamw.hpp"
#include "ampgan/nn/conv.hpp"
#include "ampgan/nn/ops.hpp"
#include "ampgan/rng.hpp"
#include "ampgan/tensor.hpp"

namespace ampgan {

struct GeneratorConfig {
    int stacks = 2;
    int layers_per_stack = 9;
    int kernel_size = 3;
    int dilation_growth = 2;
    int residual_channels = 16;
    int input_channels = 1;
    int output_channels = 1;

    void validate() const {
        if (stacks <= 0 || layers_per_stack <= 0 || kernel_size <= 0 || dilation_growth <= 0 ||
            residual_channels <= 0 || input_channels <= 0 || output_channels <= 0)
            throw ConfigError("generator: all config counts must be positive");
    }

    std::vector<int> dilations() const {
        std::vector<int> d;
        for (int s = 0; s < stacks; ++s) {
            int cur = 1;
            for (int l = 0; l < layers_per_stack; ++l) {
                d.push_back(cur);
                cur *= dilation_growth;
            }
        }
        return d;
    }
};

inline std::int64_t receptive_field(const GeneratorConfig& cfg) {
    cfg.validate();
    std::int64_t sum = 0;
    for (int d : cfg.dilations()) sum += d;
    return 1 + static_cast<std::int64_t>(cfg.kernel_size - 1) * sum;
}

// Causal feed-forward WaveNet: gated dilated convolutions with residual and
// skip paths, linear 1x1 head over the skip sum. Every convolution carries
// weight normalization.
template <typename T>
struct Generator {
    GeneratorConfig cfg;

    struct Layer {
        nn::Conv1d<T> filt, gate, res, skip;
        nn::GatedActivation<T> gated;
    };

    nn::Conv1d<T> input_proj;
    std::vector<Layer> layers;
    nn::Conv1d<T> head;

    static Generator build(const GeneratorConfig& cfg, Rng& rng) {
        cfg.validate();
        Generator g;
        g.cfg = cfg;
        const int R = cfg.residual_channels;
        auto conv1x1 = [&](int ci, int co) {
            auto c = nn::Conv1d<T>::make(ci, co, 1, 1, 1, 1, 0, 0, nn::Norm::weight, rng);
            c.prefer_gemm = false;
            return c;
        };
        g.input_proj = conv1x1(cfg.input_channels, R);
        for (int d : cfg.dilations()) {
            Layer layer;
            const int pad = (cfg.kernel_size - 1) * d;
            layer.filt = nn::Conv1d<T>::make(R, R, cfg.kernel_size, 1, d, 1, pad, 0,
                                             nn::Norm::weight, rng);
            layer.filt.prefer_gemm = false;
            layer.gate = nn::Conv1d<T>::make(R, R, cfg.kernel_size, 1, d, 1, pad, 0,
                                             nn::Norm::weight, rng);
            layer.gate.prefer_gemm = false;
            layer.res = conv1x1(R, R);
            layer.skip = conv1x1(R, R);
            g.layers.push_back(std::move(layer));
        }
        g.head = conv1x1(R, cfg.output_channels);
        return g;
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.rank() != 3 || x.dim(1) != cfg.input_channels)
            throw DataError("generator: expected [B, 1, T] input");
        if (!x.all_finite())
            throw NumericError("generator: non-finite values in input, refusing to propagate");

        Tensor<T> h = input_proj.forward(x);
        Tensor<T> skip_sum({h.dim(0), h.dim(1), h.dim(2)});
        for (Layer& layer : layers) {
            Tensor<T> a = layer.filt.forward(h);
            Tensor<T> b = layer.gate.forward(h);
            Tensor<T> z = layer.gated.forward(a, b);
            Tensor<T> s = layer.skip.forward(z);
            for (std::size_t i = 0; i < skip_sum.data.size(); ++i) skip_sum.data[i] += s.data[i];
            Tensor<T> r = layer.res.forward(z);
            for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += r.data[i];
        }
        return head.forward(skip_sum);
    }

    // Forward without keeping activations (rendering, discriminator phase).
    Tensor<T> forward_inference(const Tensor<T>& x) {
        Tensor<T> y = forward(x);
        drop_last_pass();
        return y;
    }

    // Backprop the most recent recorded forward; accumulates parameter
    // gradients and returns the gradient w.r.t. the input waveform.
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dskip_sum = head.backward(dy);
        Tensor<T> dh({dskip_sum.dim(0), dskip_sum.dim(1), dskip_sum.dim(2)});
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
            Layer& layer = *it;
            Tensor<T> dz = layer.res.backward(dh);
            Tensor<T> dz_skip = layer.skip.backward(dskip_sum);
            for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += dz_skip.data[i];
            auto [da, db] = layer.gated.backward(dz);
            Tensor<T> dh_f = layer.filt.backward(da);
            Tensor<T> dh_g = layer.gate.backward(db);
            for (std::size_t i = 0; i < dh.data.size(); ++i)
                dh.data[i] += dh_f.data[i] + dh_g.data[i];
        }
        return input_proj.backward(dh);
    }

    void drop_last_pass() {
        auto pop_conv = [](nn::Conv1d<T>& c) {
            if (!c.cache.empty()) c.cache.pop_back();
        };
        pop_conv(head);
        for (auto& layer : layers) {
            pop_conv(layer.filt);
            pop_conv(layer.gate);
            pop_conv(layer.res);
            pop_conv(layer.skip);
            if (!layer.gated.cache.empty()) layer.gated.cache.pop_back();
        }
        pop_conv(input_proj);
    }

    void zero_grad() {
        input_proj.zero_grad();
        head.zero_grad();
        for (auto& layer : layers) {
            layer.filt.zero_grad();
            layer.gate.zero_grad();
            layer.res.zero_grad();
            layer.skip.zero_grad();
        }
    }

    void clear_cache() {
        input_proj.clear_cache();
        head.clear_cache();
        for (auto& layer : layers) {
            layer.filt.clear_cache();
            layer.gate.clear_cache();
            layer.res.clear_cache();
            layer.skip.clear_cache();
            layer.gated.clear_cache();
        }
    }

    std::int64_t receptive_field() const { return ampgan::receptive_field(cfg); }

    std::int64_t param_count() const {
        std::int64_t n = input_proj.param_count() + head.param_count();
        for (const auto& layer : layers)
            n += layer.filt.param_count() + layer.gate.param_count() + layer.res.param_count() +
                 layer.skip.param_count();
        return n;
    }

    std::vector<nn::ParamRef<T>> params() {
        std::vector<nn::ParamRef<T>> out;
        input_proj.collect_params("gen.in", out);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string p = "gen.l" + std::to_string(i);
            layers[i].filt.collect_params(p + ".filt", out);
            layers[i].gate.collect_params(p + ".gate", out);
            layers[i].res.collect_params(p + ".res", out);
            layers[i].skip.collect_params(p + ".skip", out);
        }
        head.collect_params("gen.head", out);
        return out;
    }
};

// Streams a long mono signal through the generator in overlapped chunks.
// Each chunk carries receptive_field-1 samples of left context, so the
// result is bit-identical to a single forward pass.
template <typename T>
inline std::vector<T> render_chunked(Generator<T>& gen, const std::vector<T>& input,
                                     std::int64_t chunk_len = 65536) {
    if (chunk_len <= 0) throw ConfigError("render: chunk length must be positive");
    const std::int64_t n = static_cast<std::int64_t>(input.size());
    const std::int64_t ctx = gen.receptive_field() - 1;
    std::vector<T> out(static_cast<std::size_t>(n));
    for (std::int64_t start = 0; start < n; start += chunk_len) {
        const std::int64_t stop = std::min(n, start + chunk_len);
        const std::int64_t lead = std::min(ctx, start);
        Tensor<T> x({1, 1, stop - (start - lead)});
        for (std::int64_t i = 0; i < x.dim(2); ++i)
            x.at(0, 0, i) = input[static_cast<std::size_t>(start - lead + i)];
        Tensor<T> y = gen.forward_inference(x);
        for (std::int64_t i = start; i < stop; ++i)
            out[static_cast<std::size_t>(i)] = y.at(0, 0, lead + (i - start));
    }
    return out;
}

}  // namespace ampgan
