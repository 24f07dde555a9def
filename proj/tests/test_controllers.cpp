#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "swarmlab/controllers.hpp"

using namespace swarmlab;
using Catch::Approx;

namespace {

FlockState pair_state(Vec2 x0, Vec2 v0, Vec2 x1, Vec2 v1) {
    FlockState st;
    st.positions.resize(2, 2);
    st.velocities.resize(2, 2);
    st.positions.row(0) = x0.transpose();
    st.positions.row(1) = x1.transpose();
    st.velocities.row(0) = v0.transpose();
    st.velocities.row(1) = v1.transpose();
    return st;
}

MatX2 rotate_rows(const MatX2& m, const Eigen::Matrix2d& q) {
    return (q * m.transpose()).transpose();
}

}  // namespace

TEST_CASE("potential_grad: minimizer, cap, and hand value") {
    const PotentialSpec spec{1.0};

    // U'(1) = 0: the potential's minimizer sits at unit distance
    CHECK(potential_grad(Vec2(1, 0), spec).norm() == 0.0);

    CHECK(potential_grad(Vec2(2, 0), spec) == Vec2(0, 0));

    // U'(0.5) = -2/0.125 + 2/0.5 = -12
    const Vec2 g = potential_grad(Vec2(0.5, 0), spec);
    CHECK(g.x() == Approx(-12.0));
    CHECK(g.y() == 0.0);

    CHECK_THROWS_AS(potential_grad(Vec2(0, 0), spec), singularity_error);
}

TEST_CASE("expert_accel: hand cases") {
    const PotentialSpec spec{1.0};

    // at the potential minimizer with aligned velocities nothing moves
    auto st = pair_state({0, 0}, {1, 1}, {1, 0}, {1, 1});
    MatX2 a = expert_accel(st, spec, 10.0);
    CHECK(a.cwiseAbs().maxCoeff() == 0.0);

    // potential term vanishes at r = 1; alignment remains
    st = pair_state({0, 0}, {1, 0}, {1, 0}, {0, 0});
    a = expert_accel(st, spec, 10.0);
    CHECK(a(0, 0) == Approx(-1.0));
    CHECK(a(0, 1) == 0.0);
    CHECK(a(1, 0) == Approx(1.0));

    // distance 0.5 at rest: |a| = 12 exceeds the clamp, rescaled to 10
    st = pair_state({0, 0}, {0, 0}, {0.5, 0}, {0, 0});
    a = expert_accel(st, spec, 10.0);
    CHECK(a.row(0).norm() == Approx(10.0));
    // direction: gradient at r_01 = (-0.5, 0) is (12, 0); accel = -grad
    CHECK(a(0, 0) == Approx(-10.0));
    CHECK(a(1, 0) == Approx(10.0));

    st.positions.row(1) = st.positions.row(0);
    CHECK_THROWS_AS(expert_accel(st, spec, 10.0), singularity_error);
}

TEST_CASE("decentralized controllers: reductions and empty sums") {
    const PotentialSpec spec{1.0};
    Rng rng(17);
    const FlockState st = test_helpers::random_state(8, rng, 2.0);

    // complete graph reproduces the expert bitwise
    CommGraph complete;
    complete.in_neighbors.resize(8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            if (i != j) complete.in_neighbors[i].push_back(j);
    const MatX2 ex = expert_accel(st, spec, 10.0);
    const MatX2 fx = decentralized_fixed_accel(st, complete, spec, 10.0);
    CHECK(ex == fx);

    // all agents in range: the dynamic variant also reduces to the expert
    FlockState tight = st;
    tight.positions *= 0.05;
    tight.positions.array() += 5.0;  // keep distances positive but small
    bool ok = true;
    for (int i = 0; i < 8 && ok; ++i)
        for (int j = i + 1; j < 8; ++j)
            if ((tight.positions.row(i) - tight.positions.row(j)).norm() > 1.0) ok = false;
    REQUIRE(ok);
    CHECK(decentralized_dynamic_accel(tight, 1.0, spec, 10.0) ==
          expert_accel(tight, spec, 10.0));

    // isolated agent gets an empty sum
    CommGraph isolated;
    isolated.in_neighbors.resize(8);
    const MatX2 z = decentralized_fixed_accel(st, isolated, spec, 10.0);
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decentralized fixed: three agents on a line") {
    const PotentialSpec spec{10.0};  // large cap so the potential acts at distance 2
    FlockState st;
    st.positions.resize(3, 2);
    st.positions << 0, 0, 1, 0, 2, 0;
    st.velocities.resize(3, 2);
    st.velocities << 1, 0, 0, 0, -1, 0;

    CommGraph path;
    path.in_neighbors = {{1}, {0, 2}, {1}};
    const MatX2 a = decentralized_fixed_accel(st, path, spec, 100.0);

    // end agent 0: alignment -(v0 - v1) = (-1, 0) plus U'(1) = 0
    CHECK(a(0, 0) == Approx(-1.0));
    // middle agent: alignment contributions cancel, potential pulls cancel
    CHECK(a(1, 0) == Approx(0.0).margin(1e-15));
    CHECK(a(2, 0) == Approx(1.0));
}

TEST_CASE("features_psi: hand values and equivariance identity") {
    auto f = features_psi(Vec2(1, 0), Vec2(0, 1));
    CHECK(f(0) == 0.0);
    CHECK(f(1) == 1.0);
    CHECK(f(2) == 1.0);
    CHECK(f(3) == 0.0);
    CHECK(f(4) == 1.0);
    CHECK(f(5) == 0.0);

    f = features_psi(Vec2(0, 2), Vec2(0, 0));
    CHECK(f(2) == 0.0);
    CHECK(f(3) == Approx(0.125));
    CHECK(f(4) == 0.0);
    CHECK(f(5) == Approx(0.5));

    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Matrix2d q = test_helpers::random_orthogonal(rng);
        const Vec2 r(rng.uniform(-2, 2), rng.uniform(-2, 2));
        const Vec2 v(rng.uniform(-2, 2), rng.uniform(-2, 2));
        if (r.norm() < 1e-3) continue;
        const auto base = features_psi(r, v);
        const auto rot = features_psi(q * r, q * v);
        for (int b = 0; b < 3; ++b) {
            const Vec2 expect = q * base.segment<2>(2 * b);
            CHECK((rot.segment<2>(2 * b) - expect).norm() < 1e-12);
        }
    }

    CHECK_THROWS_AS(features_psi(Vec2(0, 0), Vec2(1, 1)), singularity_error);
}

TEST_CASE("aggregate_history: one-hop aggregation modes") {
    // two agents, single neighbor each
    auto st = pair_state({0, 0}, {1, 0}, {1, 0}, {0, 0});
    const CommGraph g = comm_graph(st, 2.0);
    std::vector<AgentHistory> prev(2, AgentHistory::zero(3));

    auto sum = aggregate_history(prev, st, g, AggregationMode::Sum);
    const auto expect0 = features_psi(Vec2(-1, 0), Vec2(1, 0));
    CHECK((sum[0].z.col(0) - expect0).norm() == 0.0);

    // receiver hears two messages with identical psi values
    FlockState tri;
    tri.positions.resize(3, 2);
    tri.positions << 0, 0, 1, 0, 1, 0;
    tri.velocities.resize(3, 2);
    tri.velocities << 0, 0, 0, 1, 0, 1;
    CommGraph g3;
    g3.in_neighbors = {{1, 2}, {}, {}};
    const auto m = default_messages(tri, g3);
    REQUIRE(m[0].size() == 2);
    const auto p = features_psi(m[0][0].r, m[0][0].v);
    auto mean = aggregate_history(std::vector<AgentHistory>(3, AgentHistory::zero(2)), g3, m,
                                  AggregationMode::Mean);
    auto summed = aggregate_history(std::vector<AgentHistory>(3, AgentHistory::zero(2)), g3, m,
                                    AggregationMode::Sum);
    CHECK((mean[0].z.col(0) - p).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((summed[0].z.col(0) - 2.0 * p).cwiseAbs().maxCoeff() < 1e-15);

    // isolated agent: zero columns everywhere
    CHECK(mean[1].z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate_history: k-hop delay uses previous step") {
    FlockState tri;
    tri.positions.resize(3, 2);
    tri.positions << 0, 0, 1, 0, 2, 0;
    tri.velocities = MatX2::Zero(3, 2);
    const CommGraph g = comm_graph(tri, 1.0);  // path 0-1-2

    std::vector<AgentHistory> prev(3, AgentHistory::zero(3));
    prev[1].z.col(0).setConstant(6.0);  // pretend agent 1 had a one-hop summary

    const auto next = aggregate_history(prev, tri, g, AggregationMode::Sum);
    // z^2 of agent 0 = mean over {1} of the previous z^1 = 6
    CHECK(next[0].z(0, 1) == Approx(6.0));
    // z^2 of agent 1 = mean over {0, 2} of their previous z^1, both zero
    CHECK(next[1].z(0, 1) == 0.0);
    // z^3 columns come from the previous z^2 which was zero
    CHECK(next[0].z.col(2).cwiseAbs().maxCoeff() == 0.0);

    std::vector<AgentHistory> mixed = prev;
    mixed[2] = AgentHistory::zero(2);
    CHECK_THROWS_AS(aggregate_history(mixed, tri, g, AggregationMode::Sum), input_error);
}

TEST_CASE("expert controller symmetries") {
    const PotentialSpec spec{1.0};
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const FlockState st = test_helpers::random_state(10, rng, 2.5);
        const MatX2 base = expert_accel(st, spec, 10.0);

        FlockState shifted = st;
        const Vec2 t1(rng.uniform(-10, 10), rng.uniform(-10, 10));
        const Vec2 t2(rng.uniform(-10, 10), rng.uniform(-10, 10));
        shifted.positions.rowwise() += t1.transpose();
        shifted.velocities.rowwise() += t2.transpose();
        CHECK((expert_accel(shifted, spec, 10.0) - base).cwiseAbs().maxCoeff() < 1e-10);

        FlockState rotated = st;
        const Eigen::Matrix2d q = test_helpers::random_orthogonal(rng);
        rotated.positions = rotate_rows(st.positions, q);
        rotated.velocities = rotate_rows(st.velocities, q);
        const MatX2 rot = expert_accel(rotated, spec, 10.0);
        const MatX2 expect = rotate_rows(base, q);
        const double scale = std::max(1.0, expect.cwiseAbs().maxCoeff());
        CHECK((rot - expect).cwiseAbs().maxCoeff() / scale < 1e-10);
    }
}

TEST_CASE("expert controller permutation equivariance") {
    const PotentialSpec spec{1.0};
    Rng rng(29);
    const FlockState st = test_helpers::random_state(7, rng, 2.0);
    const MatX2 base = expert_accel(st, spec, 10.0);

    std::vector<int> perm{3, 1, 6, 0, 2, 5, 4};
    FlockState shuffled;
    shuffled.positions.resize(7, 2);
    shuffled.velocities.resize(7, 2);
    for (int i = 0; i < 7; ++i) {
        shuffled.positions.row(i) = st.positions.row(perm[i]);
        shuffled.velocities.row(i) = st.velocities.row(perm[i]);
    }
    const MatX2 out = expert_accel(shuffled, spec, 10.0);
    for (int i = 0; i < 7; ++i)
        CHECK((out.row(i) - base.row(perm[i])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate_history equivariance and translation invariance") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const FlockState st = test_helpers::random_state(8, rng, 2.0);
        const CommGraph g = comm_graph(st, 1.5);
        std::vector<AgentHistory> prev(8, AgentHistory::zero(3));
        for (auto& h : prev) h.z.setRandom();
        // rotate the stored per-block features the same way as the state
        const Eigen::Matrix2d q = test_helpers::random_orthogonal(rng);
        std::vector<AgentHistory> prev_rot = prev;
        for (auto& h : prev_rot)
            for (int b = 0; b < 3; ++b) h.z.middleRows(2 * b, 2) = q * h.z.middleRows(2 * b, 2);

        const auto base = aggregate_history(prev, st, g, AggregationMode::Mean);

        FlockState rot = st;
        rot.positions = rotate_rows(st.positions, q);
        rot.velocities = rotate_rows(st.velocities, q);
        const auto rotated = aggregate_history(prev_rot, rot, comm_graph(rot, 1.5),
                                               AggregationMode::Mean);
        for (int i = 0; i < 8; ++i) {
            for (int b = 0; b < 3; ++b) {
                const Eigen::Matrix<double, 2, Eigen::Dynamic> expect =
                    q * base[i].z.middleRows(2 * b, 2);
                CHECK((rotated[i].z.middleRows(2 * b, 2) - expect).cwiseAbs().maxCoeff() < 1e-10);
            }
        }

        FlockState shifted = st;
        shifted.positions.rowwise() += Vec2(rng.uniform(-9, 9), rng.uniform(-9, 9)).transpose();
        shifted.velocities.rowwise() += Vec2(rng.uniform(-9, 9), rng.uniform(-9, 9)).transpose();
        const auto moved =
            aggregate_history(prev, shifted, comm_graph(shifted, 1.5), AggregationMode::Mean);
        for (int i = 0; i < 8; ++i)
            CHECK((moved[i].z - base[i].z).cwiseAbs().maxCoeff() < 1e-10);
    }
}
