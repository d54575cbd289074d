#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "ampgan/audio.hpp"
#include "ampgan/errors.hpp"
#include "ampgan/mel.hpp"

namespace ampgan {

struct EmbeddingSet {
    // N x d, one row per embedded window.
    std::vector<std::vector<double>> vectors;
    std::string model_id;

    std::int64_t count() const { return static_cast<std::int64_t>(vectors.size()); }
    std::int64_t dim() const { return vectors.empty() ? 0 : static_cast<std::int64_t>(vectors[0].size()); }
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const EmbeddingSet& s) {
    Eigen::MatrixXd m(s.count(), s.dim());
    for (std::int64_t i = 0; i < s.count(); ++i)
        for (std::int64_t j = 0; j < s.dim(); ++j)
            m(i, j) = s.vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

// Symmetric PSD square root via eigendecomposition; eigenvalues below
// -tolerance are an error, small negatives are clamped to zero.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, double tolerance,
                                 const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() != Eigen::Success)
        throw NumericError(std::string("frechet_distance: eigendecomposition failed for ") + what);
    Eigen::VectorXd lam = eig.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < -tolerance)
            throw NumericError(std::string("frechet_distance: ") + what +
                               " has eigenvalue " + std::to_string(lam(i)) +
                               " below the clamping tolerance");
        lam(i) = std::sqrt(std::max(lam(i), 0.0));
    }
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

// ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}) with unbiased sample
// covariances. The matrix square root is taken on the symmetric product
// S_r^{1/2} S_g S_r^{1/2}, which shares its trace with (S_r S_g)^{1/2}.
inline double frechet_distance(const EmbeddingSet& ref, const EmbeddingSet& gen) {
    if (ref.dim() != gen.dim() || ref.dim() == 0)
        throw DataError("frechet_distance: embedding dimension mismatch");
    if (ref.count() < 2 || gen.count() < 2)
        throw DataError("frechet_distance: need at least two embeddings per set");
    const std::int64_t d = ref.dim();
    if (ref.count() < d + 1 || gen.count() < d + 1)
        std::cerr << "frechet_distance: warning: fewer than d+1 embeddings; "
                     "covariance estimate is rank-deficient\n";

    const Eigen::MatrixXd a = detail::to_matrix(ref);
    const Eigen::MatrixXd b = detail::to_matrix(gen);
    const Eigen::VectorXd mu_r = a.colwise().mean();
    const Eigen::VectorXd mu_g = b.colwise().mean();
    const Eigen::MatrixXd ar = a.rowwise() - mu_r.transpose();
    const Eigen::MatrixXd bg = b.rowwise() - mu_g.transpose();
    const Eigen::MatrixXd cov_r = ar.transpose() * ar / static_cast<double>(a.rows() - 1);
    const Eigen::MatrixXd cov_g = bg.transpose() * bg / static_cast<double>(b.rows() - 1);

    constexpr double kTol = 1e-8;
    const Eigen::MatrixXd root_r = detail::sqrtm_psd(cov_r, kTol, "reference covariance");
    Eigen::MatrixXd inner = root_r * cov_g * root_r;
    inner = 0.5 * (inner + inner.transpose());  // symmetrize numerical noise

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner);
    if (eig.info() != Eigen::Success)
        throw NumericError("frechet_distance: eigendecomposition of the cross term failed");
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double lam = eig.eigenvalues()(i);
        if (lam < -kTol)
            throw NumericError("frechet_distance: cross-term eigenvalue " + std::to_string(lam) +
                               " below the clamping tolerance");
        trace_sqrt += std::sqrt(std::max(lam, 0.0));
    }

    const double value =
        (mu_r - mu_g).squaredNorm() + cov_r.trace() + cov_g.trace() - 2.0 * trace_sqrt;
    if (!std::isfinite(value))
        throw NumericError("frechet_distance: non-finite result (means norm " +
                           std::to_string((mu_r - mu_g).squaredNorm()) + ", traces " +
                           std::to_string(cov_r.trace()) + "/" + std::to_string(cov_g.trace()) +
                           ", trace sqrt " + std::to_string(trace_sqrt) + ")");
    return value;
}

// Pluggable embedding function: maps one fixed-length window to a d-vector.
struct Embedder {
    std::string model_id;
    int window = 0;
    int hop = 0;
    int dim = 0;
    std::function<std::vector<double>(const float*, int)> embed;
};

// Desk-scale stand-in for an external embedding network: per window, the
// time-mean of a 32-band log-mel spectrogram.
inline Embedder toy_embedder() {
    Embedder e;
    e.model_id = "toy-logmel-32";
    e.window = 8192;
    e.hop = 8192;
    e.dim = 32;
    e.embed = [](const float* x, int n) {
        MelConfig cfg;
        cfg.fft_size = 1024;
        cfg.hop = 512;
        cfg.n_mels = 32;
        std::vector<float> buf(x, x + n);
        const auto spec = log_mel_spectrogram(buf, cfg);
        std::vector<double> out(32, 0.0);
        for (const auto& frame : spec)
            for (std::size_t m = 0; m < frame.size(); ++m) out[m] += frame[m];
        for (double& v : out) v /= static_cast<double>(spec.size());
        return out;
    };
    return e;
}

inline EmbeddingSet embed_for_fad(const std::vector<AudioBuffer>& buffers, const Embedder& e) {
    if (!e.embed || e.window <= 0 || e.hop <= 0 || e.dim <= 0)
        throw ConfigError("embed_for_fad: embedder is not fully specified");
    EmbeddingSet out;
    out.model_id = e.model_id;
    for (const AudioBuffer& buf : buffers) {
        const std::int64_t n = static_cast<std::int64_t>(buf.samples.size());
        for (std::int64_t start = 0; start + e.window <= n; start += e.hop) {
            std::vector<double> v;
            try {
                v = e.embed(buf.samples.data() + start, e.window);
            } catch (const std::exception& ex) {
                throw DataError("embed_for_fad: embedder failed on '" + buf.source_id +
                                "' at offset " + std::to_string(start) + ": " + ex.what());
            }
            if (static_cast<int>(v.size()) != e.dim)
                throw DataError("embed_for_fad: embedder returned wrong dimension on '" +
                                buf.source_id + "'");
            out.vectors.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace ampgan
