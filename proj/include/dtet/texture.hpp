#pragma once

// Neural texture: frequency-encoded canonical points through a small ReLU MLP
// with a sigmoid head, batched over columns with Eigen.

#include "dtet/math.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace dtet {

struct TextureConfig {
    int frequencies = 6;  // sin/cos at 2^k pi for k < frequencies
    int hidden = 64;
    int hidden_layers = 2;
    std::uint64_t seed = 1;
};

/// Encoding width: the raw point plus a sin and cos per axis per frequency.
inline int encoding_dim(int frequencies) { return 3 + 6 * frequencies; }

/// Columns of `points` mapped to [x, sin(2^k pi x), cos(2^k pi x)]_k.
inline Eigen::MatrixXd encode_points(const Eigen::Matrix3Xd& points, int frequencies)
{
    Eigen::MatrixXd e(encoding_dim(frequencies), points.cols());
    e.topRows(3) = points;
    for (int k = 0; k < frequencies; ++k) {
        const double w = std::ldexp(kPi, k);
        e.middleRows(3 + 6 * k, 3) = (w * points.array()).sin().matrix();
        e.middleRows(6 + 6 * k, 3) = (w * points.array()).cos().matrix();
    }
    return e;
}

class TextureField {
public:
    struct Cache {
        Eigen::Matrix3Xd points;
        std::vector<Eigen::MatrixXd> activations;    // input encoding, then each hidden output
        std::vector<Eigen::MatrixXd> preactivations;  // each hidden pre-ReLU
        Eigen::Matrix3Xd output;
    };

    explicit TextureField(const TextureConfig& config = {}) : config_(config)
    {
        if (config.frequencies < 0 || config.hidden <= 0 || config.hidden_layers < 1)
            throw std::invalid_argument("texture: invalid network shape");
        sizes_.push_back(encoding_dim(config.frequencies));
        for (int i = 0; i < config.hidden_layers; ++i) sizes_.push_back(config.hidden);
        sizes_.push_back(3);
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            offsets_.push_back(n);
            n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
        }
        params_.assign(n, 0.0);
        initialize(config.seed);
    }

    /// He-uniform hidden layers, zero biases, and a zero output layer so every
    /// point starts at sigmoid(0) = 0.5.
    void initialize(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::fill(params_.begin(), params_.end(), 0.0);
        for (std::size_t l = 0; l + 2 < sizes_.size(); ++l) {
            const double bound = std::sqrt(6.0 / sizes_[l]);
            std::uniform_real_distribution<double> u(-bound, bound);
            auto w = weights(l);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
        }
    }

    const TextureConfig& config() const { return config_; }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    std::size_t num_parameters() const { return params_.size(); }

    Eigen::Matrix3Xd evaluate(const Eigen::Matrix3Xd& points, Cache* cache = nullptr) const
    {
        Eigen::MatrixXd a = encode_points(points, config_.frequencies);
        Cache local;
        Cache& c = cache ? *cache : local;
        c.points = points;
        c.activations.clear();
        c.preactivations.clear();
        const std::size_t layers = sizes_.size() - 1;
        for (std::size_t l = 0; l < layers; ++l) {
            Eigen::MatrixXd z = weights(l) * a;
            z.colwise() += bias(l);
            c.activations.push_back(std::move(a));
            if (l + 1 == layers) {
                c.output = (1.0 / (1.0 + (-z.array()).exp())).matrix();
                break;
            }
            a = z.cwiseMax(0.0);
            c.preactivations.push_back(std::move(z));
        }
        if (!cache) return std::move(local.output);
        return c.output;
    }

    Vec3 evaluate(const Vec3& p) const
    {
        Eigen::Matrix3Xd m(3, 1);
        m.col(0) = p;
        return evaluate(m).col(0);
    }

    /// Accumulates dL/dparams into `param_grads`; writes dL/dpoints when requested.
    void backward(const Cache& cache, const Eigen::Matrix3Xd& output_grads, std::span<double> param_grads,
                  Eigen::Matrix3Xd* point_grads = nullptr) const
    {
        if (param_grads.size() != params_.size()) throw std::invalid_argument("texture: gradient size mismatch");
        if (output_grads.cols() != cache.output.cols()) throw std::invalid_argument("texture: batch size mismatch");
        const std::size_t layers = sizes_.size() - 1;
        Eigen::MatrixXd dz = (output_grads.array() * cache.output.array() * (1.0 - cache.output.array())).matrix();
        for (std::size_t l = layers; l-- > 0;) {
            const std::size_t off = offsets_[l];
            const int rows = sizes_[l + 1], cols = sizes_[l];
            Eigen::Map<Eigen::MatrixXd> gw(param_grads.data() + off, rows, cols);
            Eigen::Map<Eigen::VectorXd> gb(param_grads.data() + off + static_cast<std::size_t>(rows) * cols, rows);
            gw.noalias() += dz * cache.activations[l].transpose();
            gb += dz.rowwise().sum();
            if (l == 0 && !point_grads) break;
            Eigen::MatrixXd da = weights(l).transpose() * dz;
            if (l == 0) {
                *point_grads = encoding_backward(cache.points, da);
                break;
            }
            dz = (da.array() * (cache.preactivations[l - 1].array() > 0.0).cast<double>()).matrix();
        }
    }

private:
    Eigen::Map<Eigen::MatrixXd> weights(std::size_t l)
    {
        return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
    }
    Eigen::Map<const Eigen::MatrixXd> weights(std::size_t l) const
    {
        return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
    }
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const
    {
        return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
    }

    Eigen::Matrix3Xd encoding_backward(const Eigen::Matrix3Xd& points, const Eigen::MatrixXd& de) const
    {
        Eigen::Matrix3Xd g = de.topRows(3);
        for (int k = 0; k < config_.frequencies; ++k) {
            const double w = std::ldexp(kPi, k);
            const Eigen::Array3Xd arg = w * points.array();
            g.array() += w * (de.middleRows(3 + 6 * k, 3).array() * arg.cos() - de.middleRows(6 + 6 * k, 3).array() * arg.sin());
        }
        return g;
    }

    TextureConfig config_;
    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

}  // namespace dtet
