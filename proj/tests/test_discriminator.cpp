#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ampgan/discriminator.hpp"
#include "ampgan/losses.hpp"

using namespace ampgan;
using Catch::Approx;

namespace {

Tensor<float> random_wave(Rng& rng, std::int64_t batch, std::int64_t len, float scale = 0.3f) {
    Tensor<float> x({batch, 1, len});
    for (auto& v : x.data) v = static_cast<float>(rng.normal() * scale);
    return x;
}

}  // namespace

TEST_CASE("scale/period layer tables", "[discriminator]") {
    const auto& msd = msd_body_spec();
    REQUIRE(msd.size() == 7);
    REQUIRE(msd[0].c_in == 1);
    REQUIRE(msd[0].c_out == 128);
    REQUIRE(msd[0].k == 15);
    REQUIRE(msd[0].stride == 1);
    REQUIRE(msd[0].groups == 1);
    REQUIRE(msd[0].pad == 0);
    REQUIRE(msd[3].c_in == 256);
    REQUIRE(msd[3].c_out == 512);
    REQUIRE(msd[3].stride == 4);
    REQUIRE(msd[3].groups == 16);
    REQUIRE(msd[6].k == 5);
    REQUIRE(msd[6].groups == 2);

    const auto& mpd = mpd_body_spec();
    REQUIRE(mpd.size() == 5);
    REQUIRE(mpd[0].c_in == 1);
    REQUIRE(mpd[0].c_out == 32);
    REQUIRE(mpd[0].kh == 5);
    REQUIRE(mpd[0].kw == 1);
    REQUIRE(mpd[0].sh == 3);
    REQUIRE(mpd[4].sh == 1);  // fifth body layer runs at stride (1,1)
    REQUIRE(mpd_head_spec().kh == 1);
    REQUIRE(mpd_head_spec().sh == 1);  // documented deviation from the table's (3,1)
    REQUIRE(mpd_periods() == std::vector<int>{2, 3, 5, 7, 11});
}

TEST_CASE("MSD layer-1 parameter count", "[discriminator]") {
    Rng rng(1);
    auto ens = DiscriminatorEnsemble<float>::build(rng);
    // 1*128*15 weights + 128 biases, pre-weight-norm.
    REQUIRE(ens.msd_raw.convs[0].weight.size() == 1u * 128u * 15u);
    REQUIRE(ens.msd_raw.convs[0].bias.size() == 128u);
    REQUIRE(ens.msd_raw.convs[0].weight.size() + ens.msd_raw.convs[0].bias.size() == 2048u);
    // Spectral norm on the raw-scale sub, weight norm elsewhere.
    REQUIRE(ens.msd_raw.convs[0].norm == nn::Norm::spectral);
    REQUIRE(ens.msd_pooled.convs[0].norm == nn::Norm::weight);
    REQUIRE(ens.mpd[0].convs[0].norm == nn::Norm::weight);
    REQUIRE(ens.mpd.size() == 5);
}

TEST_CASE("avg_pool_x4 arithmetic", "[discriminator]") {
    Tensor<float> x({1, 1, 8});
    const float vals[8] = {1, 2, 3, 4, 8, 8, 8, 8};
    std::copy(vals, vals + 8, x.data.begin());
    Tensor<float> y = nn::avg_pool_x4(x);
    REQUIRE(y.dim(2) == 2);
    REQUIRE(y.at(0, 0, 0) == Approx(2.5));
    REQUIRE(y.at(0, 0, 1) == Approx(8.0));

    Tensor<float> c({1, 1, 11});
    for (auto& v : c.data) v = 0.7f;
    Tensor<float> yc = nn::avg_pool_x4(c);
    REQUIRE(yc.dim(2) == 2);  // floor(11/4)
    for (auto& v : yc.data) REQUIRE(v == Approx(0.7f));

    Tensor<float> big({1, 1, 88200});
    REQUIRE(nn::avg_pool_x4(big).dim(2) == 22050);

    Tensor<float> shrt({1, 1, 3});
    REQUIRE_THROWS_AS(nn::avg_pool_x4(shrt), DataError);
}

TEST_CASE("reshape_for_period shapes and reflection", "[discriminator]") {
    Tensor<float> x({1, 1, 88200});
    REQUIRE(nn::reshape_for_period(x, 2).dim(2) == 44100);
    REQUIRE(nn::reshape_for_period(x, 2).dim(3) == 2);
    REQUIRE(nn::reshape_for_period(x, 7).dim(2) == 12600);
    REQUIRE(nn::reshape_for_period(x, 7).dim(3) == 7);

    Tensor<float> t({1, 1, 10});
    for (int i = 0; i < 10; ++i) t.at(0, 0, i) = static_cast<float>(i);
    Tensor<float> folded = nn::reshape_for_period(t, 3);
    REQUIRE(folded.dim(2) == 4);
    REQUIRE(folded.dim(3) == 3);
    // Reflection pad: positions 10, 11 mirror x[8], x[7].
    REQUIRE(folded.at(0, 0, 3, 1) == Approx(8.0f));
    REQUIRE(folded.at(0, 0, 3, 2) == Approx(7.0f));

    Tensor<float> empty({1, 1, 0});
    REQUIRE_THROWS_AS(nn::reshape_for_period(empty, 3), DataError);
    REQUIRE_THROWS_AS(nn::reshape_for_period(t, 0), DataError);

    // Height is ceil(T/p) for any T.
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t n = 5 + static_cast<std::int64_t>(rng.uniform_index(500));
        const int p = 1 + static_cast<int>(rng.uniform_index(12));
        Tensor<float> w({1, 1, n});
        for (auto& v : w.data) v = static_cast<float>(rng.normal());
        if (n % p != 0 && (((n + p - 1) / p) * p - n) >= n) continue;  // too short to reflect
        REQUIRE(nn::reshape_for_period(w, p).dim(2) == (n + p - 1) / p);
    }
}

TEST_CASE("ensemble emits one map per sub and is deterministic", "[discriminator]") {
    Rng rng(4);
    auto ens = DiscriminatorEnsemble<float>::build_micro(rng);
    Tensor<float> x = random_wave(rng, 2, 96);
    auto m1 = ens.forward(x);
    ens.clear_cache();
    auto m2 = ens.forward(x);
    ens.clear_cache();
    REQUIRE(m1.count() == 7);
    REQUIRE(m1.all_finite());
    for (std::size_t s = 0; s < 7; ++s) REQUIRE(m1.maps[s].data == m2.maps[s].data);

    auto msd_only = DiscriminatorEnsemble<float>::build_micro(rng, false);
    REQUIRE(msd_only.forward(x).count() == 2);
    msd_only.clear_cache();
}

TEST_CASE("full ensemble map topology across input lengths", "[discriminator]") {
    Rng rng(10);
    auto ens = DiscriminatorEnsemble<float>::build(rng);
    for (std::int64_t len : {2048, 44100}) {
        Tensor<float> x = random_wave(rng, 1, len, 0.2f);
        auto maps = ens.forward(x);
        ens.clear_cache();
        REQUIRE(maps.count() == 7);
        // MSD maps are [B, 1, t]; MPD maps are [B, 1, h, w].
        REQUIRE(maps.maps[0].rank() == 3);
        REQUIRE(maps.maps[2].rank() == 4);
        for (std::size_t s = 0; s < 5; ++s) {
            const int p = mpd_periods()[s];
            // Width stays the period through (k, 1) kernels.
            REQUIRE(maps.maps[2 + s].dim(3) == p);
        }
        REQUIRE(maps.all_finite());
    }

    // Same length, same shapes (pure function of (T, config)).
    Tensor<float> a = random_wave(rng, 1, 2048, 0.1f);
    Tensor<float> b = random_wave(rng, 1, 2048, 0.9f);
    auto ma = ens.forward(a);
    ens.clear_cache();
    auto mb = ens.forward(b);
    ens.clear_cache();
    for (std::size_t s = 0; s < 7; ++s) REQUIRE(ma.maps[s].shape == mb.maps[s].shape);
}

TEST_CASE("too-short input names the offending sub", "[discriminator]") {
    Rng rng(6);
    auto ens = DiscriminatorEnsemble<float>::build(rng);
    Tensor<float> x = random_wave(rng, 1, 600);
    try {
        ens.forward(x);
        FAIL("expected a shape error");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("msd") != std::string::npos);
    }
    ens.clear_cache();
}

TEST_CASE("hand-set micro sub matches direct convolution arithmetic", "[discriminator]") {
    // Plain (unnormalized) two-layer scale sub: conv k3 s1 p1 + head k1.
    const std::vector<MsdLayerSpec> body = {{1, 2, 3, 1, 1, 1}};
    const MsdLayerSpec head = {2, 1, 1, 1, 1, 0};
    Rng rng(2);
    auto sub = MsdSub<double>::make("micro", body, head, nn::Norm::none, rng);
    sub.convs[0].weight = {0.5, -0.25, 0.125, 0.3, 0.2, -0.1};
    sub.convs[0].bias = {0.01, -0.02};
    sub.head.weight = {1.5, -0.5};
    sub.head.bias = {0.1};

    const int N = 32;
    Tensor<double> x({1, 1, N});
    Rng rx(3);
    for (auto& v : x.data) v = rx.normal() * 0.5;
    Tensor<double> logits = sub.forward(x, false);
    sub.clear_cache();

    for (int t = 0; t < N; ++t) {
        double h[2];
        for (int o = 0; o < 2; ++o) {
            double acc = sub.convs[0].bias[o];
            for (int k = 0; k < 3; ++k) {
                const int idx = t + k - 1;
                if (idx >= 0 && idx < N) acc += sub.convs[0].weight[o * 3 + k] * x.at(0, 0, idx);
            }
            h[o] = acc > 0 ? acc : 0.1 * acc;  // leaky rectifier, slope 0.1
        }
        const double expected = sub.head.bias[0] + 1.5 * h[0] - 0.5 * h[1];
        REQUIRE(logits.at(0, 0, t) == Approx(expected).margin(1e-10));
    }
}

TEST_CASE("spectral norm keeps the constrained weight near unit norm", "[discriminator]") {
    const std::vector<MsdLayerSpec> body = {{1, 6, 5, 2, 1, 2}};
    const MsdLayerSpec head = {6, 1, 3, 1, 1, 1};
    Rng rng(15);
    auto sub = MsdSub<double>::make("sn", body, head, nn::Norm::spectral, rng);

    // Independent sigma estimate: power iteration written out in the test.
    auto sigma_of = [&](const std::vector<double>& w, int c_out) {
        const std::size_t slice = w.size() / c_out;
        std::vector<double> u(c_out, 1.0), v(slice, 0.0);
        for (int it = 0; it < 200; ++it) {
            for (std::size_t j = 0; j < slice; ++j) {
                v[j] = 0;
                for (int o = 0; o < c_out; ++o) v[j] += w[o * slice + j] * u[o];
            }
            double nv = 0;
            for (double t : v) nv += t * t;
            for (double& t : v) t /= std::sqrt(nv);
            for (int o = 0; o < c_out; ++o) {
                u[o] = 0;
                for (std::size_t j = 0; j < slice; ++j) u[o] += w[o * slice + j] * v[j];
            }
            double nu = 0;
            for (double t : u) nu += t * t;
            for (double& t : u) t /= std::sqrt(nu);
        }
        double s = 0;
        for (int o = 0; o < c_out; ++o) {
            double row = 0;
            for (std::size_t j = 0; j < slice; ++j) row += w[o * slice + j] * v[j];
            s += row * u[o];
        }
        return s;
    };

    Rng rx(7);
    for (int step = 0; step < 10; ++step) {
        Tensor<double> x({1, 1, 64});
        for (auto& v : x.data) v = rx.normal() * 0.4;
        Tensor<double> logits = sub.forward(x, true);
        Tensor<double> dl(logits.shape);
        for (auto& v : dl.data) v = 1.0 / static_cast<double>(dl.numel());
        sub.backward(dl, false, true);
        // Crude gradient step to move the raw weights around.
        for (std::size_t i = 0; i < sub.convs[0].weight.size(); ++i)
            sub.convs[0].weight[i] -= 0.05 * sub.convs[0].gweight[i];
        sub.zero_grad();

        const std::vector<double> w_eff = sub.convs[0].effective_weight(true);
        REQUIRE(sigma_of(w_eff, 6) <= 1.0 + 1e-3);
    }
}
