#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hamp/errors.hpp"
#include "hamp/metrics.hpp"
#include "test_util.hpp"

using namespace hamp;

TEST_CASE("dirichlet energy hand values") {
    Hypergraph pair = Hypergraph::from_edges(2, {{0, 1}});
    Matrix x2 = testutil::mat(2, 1, {0.0, 1.0});
    CHECK(dirichlet_energy(MatView(x2), pair) == doctest::Approx(2.0));

    Hypergraph triple = Hypergraph::from_edges(3, {{0, 1, 2}});
    Matrix x3 = testutil::mat(3, 1, {0.0, 1.0, 2.0});
    CHECK(dirichlet_energy(MatView(x3), triple) == doctest::Approx(12.0));

    Matrix flat(3, 2, 4.5);
    CHECK(dirichlet_energy(MatView(flat), triple) == doctest::Approx(0.0));

    CHECK_THROWS_AS(dirichlet_energy(MatView(x2), triple), ShapeError);
}

TEST_CASE("dirichlet energy matches the brute-force double sum") {
    Rng rng(101);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t n = 3 + rng.index(48);
        Hypergraph h = testutil::random_graph(rng, n, rng.index(6), 5);
        Matrix x = testutil::random_matrix(n, 1 + rng.index(4), rng, 2.0);
        const double fast = dirichlet_energy(MatView(x), h);
        const double slow = testutil::brute_dirichlet(MatView(x), h);
        CHECK(testutil::rel_err(fast, slow) < 1e-10);
        CHECK(fast >= 0.0);
    }
}

TEST_CASE("laplacian energy is the quadratic form of I - P") {
    Rng rng(103);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 4 + rng.index(30);
        Hypergraph h = testutil::random_graph(rng, n, 3, 4, trial % 2 == 1);
        PropagationOperator p(h);
        Matrix x = testutil::random_matrix(n, 2, rng);

        Matrix dense = testutil::dense_propagation(h);
        Matrix px = testutil::matmul_dense(dense, x);
        double want = 0.0;
        for (std::size_t i = 0; i < x.v.size(); ++i)
            want += x.v[i] * (x.v[i] - px.v[i]);
        CHECK(testutil::rel_err(laplacian_energy(MatView(x), p), want) < 1e-10);
        CHECK(laplacian_energy(MatView(x), p) > -1e-10); // PSD form

        // The sqrt-degree direction is in the kernel.
        Matrix sd(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            double deg = 0.0;
            for (int e : h.node_memberships()[i])
                deg += h.edge_weights()[static_cast<std::size_t>(e)];
            sd.at(i, 0) = std::sqrt(deg);
        }
        CHECK(std::abs(laplacian_energy(MatView(sd), p)) < 1e-10);
    }
}

TEST_CASE("second moments hand values") {
    Matrix x = testutil::mat(2, 1, {1.0, -1.0});
    GroupMoments gm = second_moments(MatView(x), {0, 0}, 1);
    CHECK(gm.group_means[0][0] == doctest::Approx(0.0));
    CHECK(gm.m2_sum[0] == doctest::Approx(2.0));
    CHECK(gm.m2_mean[0] == doctest::Approx(1.0));
    CHECK(gm.mhat2_sum == doctest::Approx(2.0));
    CHECK(gm.mhat2_mean == doctest::Approx(1.0));
    CHECK(gm.group_sizes[0] == 2);

    // A constant group contributes nothing to the centered moments.
    Matrix c(3, 2, 7.0);
    GroupMoments gc = second_moments(MatView(c), {0, 0, 0}, 1);
    CHECK(gc.mhat2_sum == doctest::Approx(0.0));
    CHECK(gc.mhat2_mean == doctest::Approx(0.0));
}

TEST_CASE("second moments scale quadratically") {
    Rng rng(107);
    Matrix x = testutil::random_matrix(6, 3, rng);
    Matrix y = x;
    const double c = -2.5;
    for (double& v : y.v) v *= c;
    std::vector<int> groups = {0, 1, 0, 1, 0, 1};
    GroupMoments a = second_moments(MatView(x), groups, 2);
    GroupMoments b = second_moments(MatView(y), groups, 2);
    for (int g = 0; g < 2; ++g) {
        CHECK(b.m2_sum[static_cast<std::size_t>(g)] ==
              doctest::Approx(c * c * a.m2_sum[static_cast<std::size_t>(g)]));
        CHECK(b.m2_mean[static_cast<std::size_t>(g)] ==
              doctest::Approx(c * c * a.m2_mean[static_cast<std::size_t>(g)]));
    }
    CHECK(b.mhat2_mean == doctest::Approx(c * c * a.mhat2_mean));
}

TEST_CASE("second moments contract errors") {
    Matrix x = testutil::mat(2, 1, {1.0, 2.0});
    CHECK_THROWS_AS(second_moments(MatView(x), {0, 0}, 2), ValidationError);
    CHECK_THROWS_AS(second_moments(MatView(x), {0, 2}, 2), ValidationError);
    CHECK_THROWS_AS(second_moments(MatView(x), {0}, 1), ShapeError);
}

TEST_CASE("separation ratio hand cases") {
    // Point masses at 0 and 2: no within-group spread.
    Matrix tight = testutil::mat(4, 1, {0.0, 0.0, 2.0, 2.0});
    std::vector<int> groups = {0, 0, 1, 1};
    CHECK(separation_ratio(MatView(tight), groups) == doctest::Approx(0.0));

    // Unit variance per group (mean form), means 0 and 2: 2 / 4.
    Matrix spread = testutil::mat(4, 1, {-1.0, 1.0, 1.0, 3.0});
    CHECK(separation_ratio(MatView(spread), groups) == doctest::Approx(0.5));

    // Translation leaves the ratio unchanged.
    Matrix shifted = spread;
    for (double& v : shifted.v) v += 5.0;
    CHECK(separation_ratio(MatView(shifted), groups) ==
          doctest::Approx(separation_ratio(MatView(spread), groups)));

    Matrix collapsed = testutil::mat(4, 1, {1.0, 2.0, 1.0, 2.0});
    CHECK_THROWS_AS(separation_ratio(MatView(collapsed), groups),
                    DegeneracyError);
}

TEST_CASE("decay fit recovers an exact exponential") {
    std::vector<double> e;
    for (int l = 0; l < 100; ++l) e.push_back(std::exp(-0.5 * l));
    DecayFit fit = decay_fit(e);
    CHECK(fit.rate == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(fit.r_squared > 0.999);
    CHECK_FALSE(fit.truncated);
}

TEST_CASE("decay fit on flat and plateaued traces") {
    DecayFit flat = decay_fit(std::vector<double>(50, 3.0));
    CHECK(std::abs(flat.rate) < 1e-12);
    CHECK(flat.r_squared == doctest::Approx(1.0));

    // Transient decay onto a positive floor: trailing half is flat.
    std::vector<double> e;
    for (int l = 0; l < 200; ++l) e.push_back(1.0 + 9.0 * std::exp(-0.5 * l));
    DecayFit tail = decay_fit(e, 0.5);
    CHECK(std::abs(tail.rate) < 1e-3);
}

TEST_CASE("decay fit truncates at non-positive entries") {
    std::vector<double> e = {8.0, 4.0, 2.0, 1.0, 0.0, 5.0};
    DecayFit fit = decay_fit(e, 1.0);
    CHECK(fit.truncated);
    CHECK(fit.used == 4);
    CHECK(fit.rate == doctest::Approx(std::log(0.5)).epsilon(1e-9));

    DecayFit empty = decay_fit({});
    CHECK(empty.used == 0);
    DecayFit lone = decay_fit({5.0});
    CHECK(lone.used == 1);
    CHECK(lone.rate == 0.0);
}

TEST_CASE("accuracy basics") {
    Matrix onehot = testutil::mat(3, 2, {1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
    std::vector<int> labels = {0, 1, 0};
    std::vector<int> all = {0, 1, 2};
    CHECK(accuracy(MatView(onehot), labels, all) == doctest::Approx(1.0));

    std::vector<int> flipped = {1, 0, 1};
    CHECK(accuracy(MatView(onehot), flipped, all) == doctest::Approx(0.0));
    CHECK(accuracy(MatView(onehot), labels, {1}) == doctest::Approx(1.0));

    CHECK_THROWS_AS(accuracy(MatView(onehot), labels, {}), ValidationError);
    CHECK_THROWS_AS(accuracy(MatView(onehot), labels, {7}), ValidationError);
    CHECK_THROWS_AS(accuracy(MatView(onehot), {0, 1}, all), ShapeError);
}

TEST_CASE("accuracy of random guessing concentrates at one half") {
    Rng rng(113);
    const std::size_t n = 10000;
    Matrix logits = testutil::random_matrix(n, 2, rng);
    std::vector<int> labels(n);
    std::vector<int> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        idx[i] = static_cast<int>(i);
    }
    const double acc = accuracy(MatView(logits), labels, idx);
    CHECK(acc > 0.48);
    CHECK(acc < 0.52);
}

TEST_CASE("second-moment ceiling formula") {
    Hypergraph h = Hypergraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    const double k = 2.0; // node degree peaks at 2

    // Balanced groups: the formula term is (5 d_minus k + 2 delta) / delta.
    const double want = (5.0 * 0.3 * k + 2.0 * 4.0) / 4.0;
    CHECK(m2_bound(h, 4.0, 0.3, 10, 10, 0.0) == doctest::Approx(want));

    // Large delta drives the term toward 2 N'' / N'.
    CHECK(m2_bound(h, 1e12, 0.3, 5, 15, 0.0) ==
          doctest::Approx(2.0 * 3.0).epsilon(1e-6));

    // The initial moment dominates when it is already larger.
    CHECK(m2_bound(h, 4.0, 0.3, 10, 10, 99.0) == doctest::Approx(99.0));

    CHECK(std::isinf(m2_bound(h, 0.0, 0.3, 10, 10, 1.0)));
    CHECK_THROWS_AS(m2_bound(h, 1.0, 0.3, 0, 10, 1.0), ValidationError);
}

TEST_CASE("energy trace records and serializes") {
    Hypergraph h = Hypergraph::from_edges(4, {{0, 1}, {1, 2, 3}});
    Matrix x = testutil::mat(4, 1, {1.0, 1.0, -1.0, -1.0});
    std::vector<int> groups = {0, 0, 1, 1};

    EnergyTrace trace;
    trace.record(0, MatView(x), h, &groups);
    Matrix y = x;
    for (double& v : y.v) v *= 0.5;
    trace.record(1, MatView(y), h, &groups);

    REQUIRE(trace.records().size() == 2);
    const TraceRecord& r0 = trace.records()[0];
    CHECK(r0.step == 0);
    CHECK(r0.energy == doctest::Approx(dirichlet_energy(MatView(x), h)));
    CHECK(r0.m2_sum == doctest::Approx(4.0));
    CHECK(r0.m2_mean == doctest::Approx(2.0)); // 1 per group, summed
    CHECK(r0.mhat2 == doctest::Approx(0.0));
    CHECK(r0.lambda == doctest::Approx(0.0));
    CHECK(r0.max_abs == doctest::Approx(1.0));
    CHECK(trace.energies()[1] == doctest::Approx(trace.records()[1].energy));
    CHECK(trace.lambdas().size() == 2);

    const std::string csv = trace.csv();
    CHECK(csv.rfind("step,E,M2_sum,M2_mean,Mhat2,lambda,max_abs\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    // Without groups the group columns are NaN but M2 is still tracked.
    EnergyTrace plain;
    plain.record(0, MatView(x), h, nullptr);
    CHECK(plain.records()[0].m2_sum == doctest::Approx(4.0));
    CHECK(std::isnan(plain.records()[0].lambda));

    // Coincident group means produce a NaN lambda rather than a throw.
    Matrix same(4, 1, 2.0);
    EnergyTrace collapsed;
    collapsed.record(0, MatView(same), h, &groups);
    CHECK(std::isnan(collapsed.records()[0].lambda));
}
