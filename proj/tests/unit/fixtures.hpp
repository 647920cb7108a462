#pragma once

#include "lccnet/network.hpp"
#include "lccnet/rng.hpp"

#include <Eigen/Dense>

namespace fixtures {

// Rows with a leading 1 and the remaining entries uniform on [-1, 1].
inline Eigen::MatrixXd design(Eigen::Index N, int d, lccnet::Rng& rng) {
    Eigen::MatrixXd X(N, d);
    for (Eigen::Index i = 0; i < N; ++i) {
        X(i, 0) = 1.0;
        for (int j = 1; j < d; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    }
    return X;
}

inline lccnet::WeightMatrix random_ball_point(int K, int d, lccnet::Rng& rng, double radius = 1.0) {
    lccnet::WeightMatrix w(K, d);
    for (int k = 0; k < K; ++k) {
        double total = rng.exponential();
        for (int j = 0; j < d; ++j) total += (w(k, j) = rng.exponential());
        for (int j = 0; j < d; ++j) w(k, j) = radius * rng.sign() * w(k, j) / total;
    }
    return w;
}

// Teacher data: y = f_teacher(x) + noise_sd * N(0,1).
inline lccnet::Dataset teacher_data(const lccnet::NetworkConfig& cfg, const lccnet::WeightMatrix& teacher,
                                    Eigen::Index N, double noise_sd, lccnet::Rng& rng) {
    lccnet::Dataset data;
    data.X = design(N, cfg.d, rng);
    data.y = lccnet::network_outputs(cfg, teacher, data.X, N);
    for (Eigen::Index i = 0; i < N; ++i) data.y[i] += noise_sd * rng.normal();
    return data;
}

}  // namespace fixtures
