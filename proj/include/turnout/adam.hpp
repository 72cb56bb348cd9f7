#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "turnout/error.hpp"

namespace turnout {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias-corrected moment estimates:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps),  m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t)
class Adam {
public:
    Adam(Eigen::Index size, AdamConfig config)
        : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
        if (!(config.learning_rate > 0) || !(config.beta1 >= 0 && config.beta1 < 1) ||
            !(config.beta2 >= 0 && config.beta2 < 1) || !(config.epsilon > 0)) {
            throw Error(ErrorKind::InvalidArgument, "invalid Adam hyperparameters");
        }
    }

    void step(Eigen::Ref<Eigen::VectorXd> theta, const Eigen::Ref<const Eigen::VectorXd>& grad) {
        if (theta.size() != m_.size() || grad.size() != m_.size()) {
            throw Error(ErrorKind::Dimension, "Adam parameter/gradient size mismatch");
        }
        ++t_;
        m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
        v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
        const double m_correction = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double v_correction = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        theta.array() -= config_.learning_rate * (m_.array() / m_correction) /
                         ((v_.array() / v_correction).sqrt() + config_.epsilon);
    }

    std::int64_t steps() const noexcept { return t_; }
    const Eigen::VectorXd& first_moment() const noexcept { return m_; }
    const Eigen::VectorXd& second_moment() const noexcept { return v_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    std::int64_t t_ = 0;
};

} // namespace turnout
