#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "mrfc/model.hpp"
#include "mrfc/rng.hpp"

using namespace mrfc;

namespace {

GraphStructure chain_structure(int n) {
    GraphStructure g;
    for (int i = 0; i < n; ++i) {
        VarRole role = (i == 0) ? VarRole::label : VarRole::feature;
        g.variables.push_back({i, "v" + std::to_string(i), 2, role});
    }
    for (int i = 0; i + 1 < n; ++i) g.edges.push_back({i, i + 1});
    return g;
}

MarkovNetwork seeded_chain(int n, std::uint64_t seed) {
    GraphStructure g = chain_structure(n);
    LogLinearParams p = zero_params(g);
    Rng rng(seed);
    for (auto& t : p.unary)
        for (auto& x : t) x = 2.0 * rng.next_double() - 1.0;
    for (auto& t : p.pairwise)
        for (auto& x : t) x = 2.0 * rng.next_double() - 1.0;
    return MarkovNetwork(g, p);
}

void for_each_binary_assignment(int n, const std::function<void(const Assignment&)>& fn) {
    Assignment a(static_cast<std::size_t>(n), 0);
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
        for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = (code >> i) & 1;
        fn(a);
    }
}

}  // namespace

TEST_CASE("log_score zero parameters") {
    MarkovNetwork net = MarkovNetwork::zeros(chain_structure(3));
    CHECK(log_score(net, {0, 1, 0}) == 0.0);
    CHECK(log_score(net, {1, 1, 1}) == 0.0);
}

TEST_CASE("log_score single variable single term") {
    GraphStructure g;
    g.variables.push_back({0, "y", 2, VarRole::label});
    LogLinearParams p = zero_params(g);
    p.unary[0][0] = std::log(2.0);
    MarkovNetwork net(g, p);
    CHECK(log_score(net, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_score(net, {1}) == 0.0);
}

TEST_CASE("log_score matches term-by-term summation on seeded chains") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        MarkovNetwork net = seeded_chain(3, seed);
        for_each_binary_assignment(3, [&](const Assignment& a) {
            double expect = 0.0;
            for (int v = 0; v < 3; ++v) {
                expect += net.params().unary[static_cast<std::size_t>(v)]
                                            [static_cast<std::size_t>(a[static_cast<std::size_t>(v)])];
            }
            for (std::size_t e = 0; e < net.structure().edges.size(); ++e) {
                const Edge& ed = net.structure().edges[e];
                int su = a[static_cast<std::size_t>(ed.u)];
                int sv = a[static_cast<std::size_t>(ed.v)];
                expect += net.params().pairwise[e][static_cast<std::size_t>(su * 2 + sv)];
            }
            CHECK(log_score(net, a) == doctest::Approx(expect).epsilon(1e-12));
        });
    }
}

TEST_CASE("log_score rejects bad assignments") {
    MarkovNetwork net = MarkovNetwork::zeros(chain_structure(3));
    CHECK_THROWS_AS(log_score(net, {0, 1}), InvalidAssignmentError);
    CHECK_THROWS_AS(log_score(net, {0, 1, 2}), InvalidAssignmentError);
}

TEST_CASE("partition function uniform potentials counts states") {
    GraphStructure single;
    single.variables.push_back({0, "y", 2, VarRole::label});
    CHECK(partition_function_exact(MarkovNetwork::zeros(single)) == doctest::Approx(2.0));
    CHECK(partition_function_exact(MarkovNetwork::zeros(chain_structure(2))) ==
          doctest::Approx(4.0));
}

TEST_CASE("partition function matches enumeration on seeded chains") {
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        MarkovNetwork net = seeded_chain(3, seed);
        double z = 0.0;
        for_each_binary_assignment(3,
                                   [&](const Assignment& a) { z += std::exp(log_score(net, a)); });
        CHECK(partition_function_exact(net) == doctest::Approx(z).epsilon(1e-12));
    }
}

TEST_CASE("partition function respects the state limit") {
    MarkovNetwork net = MarkovNetwork::zeros(chain_structure(8));
    CHECK_THROWS_AS(log_partition_exact(net, 100), TooLargeError);
}

TEST_CASE("joint probability of the 3/8 worked case") {
    GraphStructure g = chain_structure(2);
    LogLinearParams p = zero_params(g);
    p.pairwise[0][0] = std::log(3.0);  // (0,0)
    p.pairwise[0][3] = std::log(3.0);  // (1,1)
    MarkovNetwork net(g, p);
    CHECK(joint_probability(net, {0, 0}) == doctest::Approx(3.0 / 8.0).epsilon(1e-12));
    CHECK(joint_probability(net, {0, 1}) == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("uniform potentials give 2^-n everywhere and probabilities sum to 1") {
    for (int n : {1, 2, 4}) {
        MarkovNetwork net = MarkovNetwork::zeros(chain_structure(n));
        double total = 0.0;
        for_each_binary_assignment(n, [&](const Assignment& a) {
            double pr = joint_probability(net, a);
            CHECK(pr == doctest::Approx(std::pow(2.0, -n)).epsilon(1e-12));
            total += pr;
        });
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("seeded joints sum to 1") {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        MarkovNetwork net = seeded_chain(4, seed);
        double total = 0.0;
        for_each_binary_assignment(4,
                                   [&](const Assignment& a) { total += joint_probability(net, a); });
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("disconnected networks have additive scores") {
    // two disconnected seeded 2-node components inside one 4-node network
    GraphStructure g;
    for (int i = 0; i < 4; ++i) {
        g.variables.push_back({i, "v" + std::to_string(i), 2,
                               i == 0 ? VarRole::label : VarRole::feature});
    }
    g.edges = {{0, 1}, {2, 3}};
    LogLinearParams p = zero_params(g);
    Rng rng(7);
    for (auto& t : p.unary)
        for (auto& x : t) x = rng.next_double();
    for (auto& t : p.pairwise)
        for (auto& x : t) x = rng.next_double();
    MarkovNetwork net(g, p);

    for_each_binary_assignment(4, [&](const Assignment& a) {
        double left = p.unary[0][static_cast<std::size_t>(a[0])] +
                      p.unary[1][static_cast<std::size_t>(a[1])] +
                      p.pairwise[0][static_cast<std::size_t>(a[0] * 2 + a[1])];
        double right = p.unary[2][static_cast<std::size_t>(a[2])] +
                       p.unary[3][static_cast<std::size_t>(a[3])] +
                       p.pairwise[1][static_cast<std::size_t>(a[2] * 2 + a[3])];
        CHECK(log_score(net, a) == doctest::Approx(left + right).epsilon(1e-12));
    });
}

TEST_CASE("shift invariance of potential tables") {
    MarkovNetwork net = seeded_chain(3, 99);
    double z0 = partition_function_exact(net);

    const double c = 0.7;
    LogLinearParams shifted = net.params();
    for (auto& x : shifted.unary[1]) x += c;
    MarkovNetwork net2(net.structure(), shifted);

    CHECK(partition_function_exact(net2) == doctest::Approx(z0 * std::exp(c)).epsilon(1e-9));
    for_each_binary_assignment(3, [&](const Assignment& a) {
        CHECK(joint_probability(net2, a) ==
              doctest::Approx(joint_probability(net, a)).epsilon(1e-9));
    });
}

TEST_CASE("joint_state_count handles mixed cardinalities") {
    GraphStructure g;
    g.variables.push_back({0, "y", 2, VarRole::label});
    g.variables.push_back({1, "a", 3, VarRole::feature});
    g.variables.push_back({2, "b", 5, VarRole::feature});
    CHECK(joint_state_count(g, kDefaultExactLimit) == 30);
}

TEST_CASE("serialization round-trips a single-variable network") {
    GraphStructure g;
    g.variables.push_back({0, "y", 2, VarRole::label});
    LogLinearParams p = zero_params(g);
    p.unary[0] = {0.25, -1.5};
    MarkovNetwork net(g, p);
    MarkovNetwork back = deserialize_model(serialize_model(net));
    CHECK(back.structure() == net.structure());
    CHECK(back.params() == net.params());
}

TEST_CASE("serialization round-trips seeded networks with identical scores") {
    for (std::uint64_t seed = 30; seed < 33; ++seed) {
        MarkovNetwork net = seeded_chain(4, seed);
        MarkovNetwork back = deserialize_model(serialize_model(net));
        CHECK(back.structure() == net.structure());
        Rng rng(seed + 1);
        for (int t = 0; t < 100; ++t) {
            Assignment a;
            for (int v = 0; v < 4; ++v) a.push_back(rng.next_int(2));
            CHECK(log_score(back, a) == log_score(net, a));
        }
    }
}

TEST_CASE("serialization bytes are deterministic") {
    MarkovNetwork net = seeded_chain(3, 5);
    CHECK(serialize_model(net) == serialize_model(net));
}

TEST_CASE("truncated document raises a parse error") {
    std::string text = serialize_model(seeded_chain(3, 5));
    CHECK_THROWS_AS(deserialize_model(text.substr(0, text.size() / 2)), ParseError);
    CHECK_THROWS_AS(deserialize_model("{}"), ParseError);
    CHECK_THROWS_AS(deserialize_model("not a document"), ParseError);
}

TEST_CASE("structure validation rejects malformed graphs") {
    GraphStructure g = chain_structure(3);
    GraphStructure bad = g;
    bad.edges.push_back({1, 1});
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = g;
    bad.variables[1].cardinality = 1;
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = g;
    bad.variables[1].role = VarRole::label;
    CHECK_THROWS_AS(bad.validate(), Error);

    bad = g;
    bad.edges.push_back({0, 9});
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("parameter shape mismatch rejected at construction") {
    GraphStructure g = chain_structure(2);
    LogLinearParams p = zero_params(g);
    p.unary[0].push_back(0.0);
    CHECK_THROWS_AS(MarkovNetwork(g, p), Error);
}
