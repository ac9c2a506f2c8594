#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace siaa {

// Adam over flat parameter blocks (Eigen matrices and vectors register their
// raw storage). First/second moment decay keep the usual (0.9, 0.999)
// defaults; the learning rate comes from the training config.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void register_param(double* data, std::size_t n) {
        blocks_.push_back({data, n});
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    }

    // gradient blocks must match the registered parameter blocks in order and size
    void step(const std::vector<const double*>& grads) {
        if (grads.size() != blocks_.size())
            throw std::invalid_argument("Adam::step: gradient block count mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            double* p = blocks_[b].data;
            const double* g = grads[b];
            for (std::size_t i = 0; i < blocks_[b].size; ++i) {
                m_[b][i] = beta1_ * m_[b][i] + (1.0 - beta1_) * g[i];
                v_[b][i] = beta2_ * v_[b][i] + (1.0 - beta2_) * g[i] * g[i];
                p[i] -= lr_ * (m_[b][i] / c1) / (std::sqrt(v_[b][i] / c2) + eps_);
            }
        }
    }

private:
    struct Block {
        double* data;
        std::size_t size;
    };
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Block> blocks_;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace siaa
