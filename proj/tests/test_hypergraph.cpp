#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "hamp/errors.hpp"
#include "hamp/hypergraph.hpp"
#include "hamp/io.hpp"
#include "test_util.hpp"

using namespace hamp;
using testutil::TempDir;

TEST_CASE("from_edges builds degree tables and transpose") {
    Hypergraph h = Hypergraph::from_edges(4, {{0, 1, 2}, {2, 3}});
    CHECK(h.num_nodes() == 4);
    CHECK(h.num_edges() == 2);
    CHECK(h.degrees().node_degrees == std::vector<int>{1, 1, 2, 1});
    CHECK(h.degrees().edge_sizes == std::vector<int>{3, 2});
    CHECK(h.degrees().max_node_degree == 2);
    CHECK(h.node_memberships()[2] == std::vector<int>{0, 1});
    CHECK(h.num_incidences() == 5);
    CHECK(h.edge_weights() == std::vector<double>{1.0, 1.0});
    h.validate();
}

TEST_CASE("from_edges rejects malformed input") {
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{}}), ValidationError);
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{0, 3}}), ValidationError);
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{0, -1}}), ValidationError);
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{0, 1, 0}}), ValidationError);
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{0, 1}}, {0.0}), ValidationError);
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{0, 1}}, {-2.0}), ValidationError);
    CHECK_THROWS_AS(Hypergraph::from_edges(3, {{0, 1}}, {1.0, 1.0}),
                    ValidationError);
}

TEST_CASE("degree conservation and transpose round-trip on random instances") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 5 + rng.index(46);
        Hypergraph h = testutil::random_graph(rng, n, rng.index(8), 5,
                                              trial % 2 == 1);
        h.validate();
        long dv = 0, de = 0;
        for (int d : h.degrees().node_degrees) dv += d;
        for (int s : h.degrees().edge_sizes) de += s;
        CHECK(dv == de);
        CHECK(static_cast<std::size_t>(dv) == h.num_incidences());

        // Rebuild the transpose by hand and compare.
        std::vector<std::vector<int>> memb(n);
        for (std::size_t e = 0; e < h.num_edges(); ++e)
            for (int i : h.edge_members()[e])
                memb[static_cast<std::size_t>(i)].push_back(static_cast<int>(e));
        CHECK(memb == h.node_memberships());

        // CSR incidence layout agrees with the membership lists.
        for (std::size_t i = 0; i < n; ++i) {
            const auto& ms = h.node_memberships()[i];
            const std::size_t lo = h.incidence_offsets()[i];
            CHECK(h.incidence_offsets()[i + 1] - lo == ms.size());
            for (std::size_t k = 0; k < ms.size(); ++k)
                CHECK(h.incidence_edges()[lo + k] == ms[k]);
        }
    }
}

TEST_CASE("connectivity detection") {
    CHECK(Hypergraph::from_edges(3, {{0, 1}, {1, 2}}).is_connected());
    CHECK_FALSE(Hypergraph::from_edges(4, {{0, 1}, {2, 3}}).is_connected());
    CHECK_FALSE(Hypergraph::from_edges(3, {{0, 1}}).is_connected()); // node 2 isolated
    CHECK(Hypergraph::from_edges(0, {}).is_connected());
}

TEST_CASE("text loader parses the documented format") {
    TempDir td;
    const auto path = td.path / "g.txt";
    io::atomic_write(path, "3 2\n0: 0 1\n1: 1 2\n");
    Hypergraph h = load_hypergraph(path);
    CHECK(h.num_nodes() == 3);
    CHECK(h.num_edges() == 2);
    CHECK(h.degrees().node_degrees == std::vector<int>{1, 2, 1});
    CHECK(h.degrees().edge_sizes == std::vector<int>{2, 2});
}

TEST_CASE("text loader tolerates blank lines and round-trips") {
    TempDir td;
    const auto path = td.path / "g.txt";
    io::atomic_write(path, "\n4 2\n\n0: 0 1 2\n1: 2 3\n\n");
    Hypergraph h = load_hypergraph(path);
    CHECK(h.num_edges() == 2);

    const auto again = td.path / "g2.txt";
    io::atomic_write(again, hypergraph_text(h));
    Hypergraph h2 = load_hypergraph(again);
    CHECK(h2.edge_members() == h.edge_members());
    CHECK(h2.num_nodes() == h.num_nodes());
}

TEST_CASE("single all-node hyperedge gives unit degrees") {
    TempDir td;
    const auto path = td.path / "g.txt";
    io::atomic_write(path, "5 1\n0: 0 1 2 3 4\n");
    Hypergraph h = load_hypergraph(path);
    CHECK(h.degrees().node_degrees == std::vector<int>(5, 1));
    CHECK(h.degrees().max_node_degree == 1);
}

TEST_CASE("text loader reports malformed files with line numbers") {
    TempDir td;
    auto write = [&](const std::string& body) {
        const auto p = td.path / "bad.txt";
        io::atomic_write(p, body);
        return p;
    };
    CHECK_THROWS_AS(load_hypergraph(write("")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("x y\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 2 9\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 2\n0 0 1\n1: 1 2\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 2\n1: 0 1\n0: 1 2\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 2\n0: 0 1\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 1\n0: 0 one\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 1\n0:\n")), ParseError);
    CHECK_THROWS_AS(load_hypergraph(write("3 1\n0: 0 1\n0: 0\n")), ParseError);

    // Node index out of range carries the offending line number.
    try {
        load_hypergraph(write("3 1\n0: 0 99\n"));
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(e.line_number == 2);
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("propagation operator on two nodes sharing one edge") {
    Hypergraph h = Hypergraph::from_edges(2, {{0, 1}});
    PropagationOperator p(h);
    Matrix dense = p.to_dense();
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(dense.at(i, j) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("propagation operator on a singleton hyperedge is the identity") {
    Hypergraph h = Hypergraph::from_edges(1, {{0}});
    PropagationOperator p(h);
    Matrix dense = p.to_dense();
    CHECK(dense.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("operator apply matches the dense definition oracle") {
    Rng rng(29);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 4 + rng.index(47);
        Hypergraph h = testutil::random_graph(rng, n, 2 + rng.index(5), 4,
                                              trial % 3 == 0);
        Matrix oracle = testutil::dense_propagation(h);
        PropagationOperator p(h);

        // to_dense agrees entrywise with the definition.
        Matrix dense = p.to_dense();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(std::abs(dense.at(i, j) - oracle.at(i, j)) < 1e-12);
                CHECK(dense.at(i, j) == dense.at(j, i)); // exact symmetry
            }

        // Factored apply agrees with the dense product on random features.
        Matrix x = testutil::random_matrix(n, 3, rng);
        Matrix fast = p.apply(MatView(x));
        Matrix slow = testutil::matmul_dense(oracle, x);
        for (std::size_t i = 0; i < fast.v.size(); ++i)
            CHECK(std::abs(fast.v[i] - slow.v[i]) < 1e-12);
    }
}

TEST_CASE("operator spectrum sits in [0,1] with kernel direction sqrt(deg)") {
    Rng rng(31);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 4 + rng.index(40);
        Hypergraph h = testutil::random_graph(rng, n, 3, 4, trial % 2 == 1);
        PropagationOperator p(h);
        auto eig = testutil::jacobi_eigenvalues(p.to_dense());
        CHECK(eig.front() > -1e-10);
        CHECK(eig.back() < 1.0 + 1e-10);

        // P fixes D^{1/2} 1, so I - P annihilates it.
        Matrix sd(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (int e : h.node_memberships()[i])
                d += h.edge_weights()[static_cast<std::size_t>(e)];
            sd.at(i, 0) = std::sqrt(d);
        }
        Matrix psd = p.apply(MatView(sd));
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::abs(psd.at(i, 0) - sd.at(i, 0)) < 1e-12);

        // On a connected instance the eigenvalue 1 is simple.
        if (h.is_connected()) {
            CHECK(eig.back() == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(eig[n - 2] < 1.0 - 1e-8);
        }
    }
}

TEST_CASE("isolated node policy") {
    Hypergraph h = Hypergraph::from_edges(3, {{0, 1}}); // node 2 isolated
    CHECK_THROWS_AS(PropagationOperator(h, IsolatedPolicy::reject),
                    DegeneracyError);

    PropagationOperator p(h, IsolatedPolicy::self_loop);
    Matrix x = testutil::mat(3, 1, {1.0, 3.0, 7.0});
    Matrix y = p.apply(MatView(x));
    CHECK(y.at(0, 0) == doctest::Approx(2.0));
    CHECK(y.at(1, 0) == doctest::Approx(2.0));
    CHECK(y.at(2, 0) == doctest::Approx(7.0)); // self-loop keeps it fixed
}

TEST_CASE("clique homophily hand values") {
    Hypergraph one = Hypergraph::from_edges(3, {{0, 1, 2}});
    CHECK(ce_homophily(one, {0, 0, 0}) == doctest::Approx(1.0));
    CHECK(ce_homophily(one, {0, 0, 1}) == doctest::Approx(1.0 / 3.0));

    // Pair multiplicity across hyperedges unless dedupe is requested.
    Hypergraph two = Hypergraph::from_edges(3, {{0, 1}, {0, 1, 2}});
    CHECK(ce_homophily(two, {0, 0, 1}) == doctest::Approx(0.5));
    CHECK(ce_homophily(two, {0, 0, 1}, true) == doctest::Approx(1.0 / 3.0));

    // No co-hyperedge pair at all is vacuously pure.
    Hypergraph singletons = Hypergraph::from_edges(2, {{0}, {1}});
    CHECK(ce_homophily(singletons, {0, 1}) == doctest::Approx(1.0));

    CHECK_THROWS_AS(ce_homophily(one, {0, 0}), ValidationError);
}

TEST_CASE("homophily bounds on random labelings") {
    Rng rng(71);
    for (int trial = 0; trial < 10; ++trial) {
        Hypergraph h = testutil::random_graph(rng, 6 + rng.index(30), 4);
        std::vector<int> labels(h.num_nodes());
        for (auto& y : labels) y = static_cast<int>(rng.index(3));
        const double v = ce_homophily(h, labels);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(ce_homophily(h, std::vector<int>(h.num_nodes(), 5)) ==
              doctest::Approx(1.0));
    }
}

TEST_CASE("dataset loading wires features, labels and splits") {
    TempDir td;
    io::atomic_write(td.path / "g.txt", "4 2\n0: 0 1 2\n1: 2 3\n");
    io::atomic_write(td.path / "x.csv", "1,0\n0,1\n1,1\n0,0\n");
    io::atomic_write(td.path / "y.txt", "0\n0\n1\n1\n");
    io::atomic_write(td.path / "train.txt", "0\n3\n");
    io::atomic_write(td.path / "val.txt", "1\n");
    io::atomic_write(td.path / "test.txt", "2\n");

    DatasetPaths paths;
    paths.hypergraph = td.path / "g.txt";
    paths.features = td.path / "x.csv";
    paths.labels = td.path / "y.txt";
    paths.train_split = td.path / "train.txt";
    paths.val_split = td.path / "val.txt";
    paths.test_split = td.path / "test.txt";

    LabeledDataset ds = load_dataset(paths);
    CHECK(ds.graph.num_nodes() == 4);
    CHECK(ds.has_features());
    CHECK(ds.features.rows == 4);
    CHECK(ds.features.cols == 2);
    CHECK(ds.features.at(2, 1) == doctest::Approx(1.0));
    CHECK(ds.labels == std::vector<int>{0, 0, 1, 1});
    CHECK(ds.num_classes == 2);
    CHECK(ds.split.train == std::vector<int>{0, 3});
    CHECK(ds.split.val == std::vector<int>{1});
    CHECK(ds.split.test == std::vector<int>{2});

    // Structural mismatches are rejected at load time.
    io::atomic_write(td.path / "short.csv", "1,0\n0,1\n");
    DatasetPaths bad = paths;
    bad.features = td.path / "short.csv";
    CHECK_THROWS_AS(load_dataset(bad), ValidationError);

    io::atomic_write(td.path / "wild.txt", "9\n");
    DatasetPaths wild = paths;
    wild.test_split = td.path / "wild.txt";
    CHECK_THROWS_AS(load_dataset(wild), ValidationError);

    DatasetPaths missing = paths;
    missing.hypergraph = td.path / "nope.txt";
    CHECK_THROWS_AS(load_dataset(missing), IoError);
}

TEST_CASE("graph-only dataset leaves optional parts empty") {
    TempDir td;
    io::atomic_write(td.path / "g.txt", "2 1\n0: 0 1\n");
    DatasetPaths paths;
    paths.hypergraph = td.path / "g.txt";
    LabeledDataset ds = load_dataset(paths);
    CHECK_FALSE(ds.has_features());
    CHECK_FALSE(ds.has_labels());
    CHECK(ds.split.train.empty());
}
