#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "swarmlab/flock.hpp"
#include "swarmlab/rng.hpp"

namespace test_helpers {

// Uniform rotation, reflected with probability 1/2: covers both components
// of O(2).
inline Eigen::Matrix2d random_orthogonal(swarmlab::Rng& rng) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    Eigen::Matrix2d q;
    q << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    if (rng.coin(0.5)) q.col(1) = -q.col(1);
    return q;
}

inline Eigen::Matrix2d random_rotation(swarmlab::Rng& rng) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    Eigen::Matrix2d q;
    q << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return q;
}

inline swarmlab::FlockState random_state(int n, swarmlab::Rng& rng, double pos_scale = 3.0,
                                         double vel_scale = 2.0, double min_sep = 0.05) {
    swarmlab::FlockState st;
    st.positions.resize(n, 2);
    st.velocities.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        while (true) {
            const swarmlab::Vec2 x(rng.uniform(-pos_scale, pos_scale),
                                   rng.uniform(-pos_scale, pos_scale));
            bool ok = true;
            for (int j = 0; j < i; ++j)
                if ((x.transpose() - st.positions.row(j)).norm() < min_sep) ok = false;
            if (ok) {
                st.positions.row(i) = x;
                break;
            }
        }
        st.velocities(i, 0) = rng.uniform(-vel_scale, vel_scale);
        st.velocities(i, 1) = rng.uniform(-vel_scale, vel_scale);
    }
    return st;
}

inline double rel_err(double a, double b, double floor_val = 1e-30) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_val});
}

}  // namespace test_helpers
