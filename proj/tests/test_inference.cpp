#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mrfc/inference.hpp"
#include "mrfc/model.hpp"
#include "mrfc/rng.hpp"

using namespace mrfc;

namespace {

GraphStructure binary_structure(int n, const std::vector<Edge>& edges) {
    GraphStructure g;
    for (int i = 0; i < n; ++i) {
        g.variables.push_back({i, "v" + std::to_string(i), 2,
                               i == 0 ? VarRole::label : VarRole::feature});
    }
    g.edges = edges;
    return g;
}

MarkovNetwork random_network(int n, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    std::vector<Edge> edges;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (rng.next_double() < 0.4) edges.push_back({u, v});
        }
    }
    GraphStructure g = binary_structure(n, edges);
    LogLinearParams p = zero_params(g);
    for (auto& t : p.unary)
        for (auto& x : t) x = scale * (2.0 * rng.next_double() - 1.0);
    for (auto& t : p.pairwise)
        for (auto& x : t) x = scale * (2.0 * rng.next_double() - 1.0);
    return MarkovNetwork(g, p);
}

double max_abs_err(const MarginalTable& a, const MarginalTable& b) {
    double worst = 0.0;
    for (std::size_t v = 0; v < a.dist.size(); ++v) {
        for (std::size_t k = 0; k < a.dist[v].size(); ++k) {
            worst = std::max(worst, std::abs(a.dist[v][k] - b.dist[v][k]));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("exact marginals are uniform for uniform potentials") {
    MarkovNetwork net = MarkovNetwork::zeros(binary_structure(3, {{0, 1}, {1, 2}}));
    MarginalTable m = marginals_exact(net, {});
    for (const auto& d : m.dist) {
        CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("exact conditional on attractive edge gives 3/4") {
    GraphStructure g = binary_structure(2, {{0, 1}});
    LogLinearParams p = zero_params(g);
    p.pairwise[0][0] = std::log(3.0);
    p.pairwise[0][3] = std::log(3.0);
    MarkovNetwork net(g, p);
    MarginalTable m = marginals_exact(net, {{0, 0}});
    CHECK(m.dist[0][0] == doctest::Approx(1.0));  // observed point mass
    CHECK(m.dist[1][0] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("evidence on a disconnected node leaves other marginals unchanged") {
    MarkovNetwork net = random_network(4, 3);
    // build a disconnected variant: drop all edges touching node 3
    std::vector<Edge> kept;
    for (const Edge& e : net.structure().edges) {
        if (e.u != 3 && e.v != 3) kept.push_back(e);
    }
    GraphStructure g = binary_structure(4, kept);
    LogLinearParams p = zero_params(g);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (std::size_t e = 0; e < net.structure().edges.size(); ++e) {
            if (net.structure().edges[e] == kept[i]) p.pairwise[i] = net.params().pairwise[e];
        }
    }
    p.unary = net.params().unary;
    MarkovNetwork disc(g, p);

    MarginalTable free = marginals_exact(disc, {});
    MarginalTable cond = marginals_exact(disc, {{3, 1}});
    for (int v = 0; v < 3; ++v) {
        CHECK(cond.dist[static_cast<std::size_t>(v)][0] ==
              doctest::Approx(free.dist[static_cast<std::size_t>(v)][0]).epsilon(1e-12));
    }
}

TEST_CASE("exact marginal rows sum to 1 and errors are raised") {
    MarkovNetwork net = random_network(5, 11);
    MarginalTable m = marginals_exact(net, {{2, 1}});
    for (const auto& d : m.dist) {
        double s = 0.0;
        for (double x : d) s += x;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(marginals_exact(net, {{2, 5}}), InvalidEvidenceError);
    CHECK_THROWS_AS(marginals_exact(net, {{9, 0}}), InvalidEvidenceError);
    CHECK_THROWS_AS(marginals_exact(net, {}, 4), TooLargeError);
}

TEST_CASE("gibbs on a single uniform variable lands near one half") {
    GraphStructure g;
    g.variables.push_back({0, "y", 2, VarRole::label});
    MarkovNetwork net = MarkovNetwork::zeros(g);
    GibbsConfig cfg;
    cfg.seed = 4;
    cfg.samples = 5000;
    auto [m, diag] = marginals_gibbs(net, {}, cfg);
    CHECK(std::abs(m.dist[0][0] - 0.5) < 0.03);
    CHECK(diag.method == InferMethod::gibbs);
}

TEST_CASE("gibbs matches exact marginals within tolerance on random networks") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MarkovNetwork net = random_network(6, 100 + seed);
        GibbsConfig cfg;
        cfg.seed = derive_seed(9, seed);
        cfg.burn_in = 500;
        cfg.samples = 8000;
        auto [approx, diag] = marginals_gibbs(net, {{1, 0}}, cfg);
        MarginalTable exact = marginals_exact(net, {{1, 0}});
        CHECK(max_abs_err(approx, exact) < 0.03);
        CHECK(approx.dist[1][0] == doctest::Approx(1.0));
    }
}

TEST_CASE("gibbs is deterministic per seed") {
    MarkovNetwork net = random_network(6, 42);
    GibbsConfig cfg;
    cfg.seed = 77;
    cfg.samples = 500;
    auto [a, da] = marginals_gibbs(net, {}, cfg);
    auto [b, db] = marginals_gibbs(net, {}, cfg);
    CHECK(a.dist == b.dist);
    cfg.seed = 78;
    auto [c, dc] = marginals_gibbs(net, {}, cfg);
    CHECK(a.dist != c.dist);
}

TEST_CASE("gibbs validates its config and evidence") {
    MarkovNetwork net = random_network(4, 1);
    GibbsConfig cfg;
    cfg.samples = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.samples = 10;
    CHECK_THROWS_AS(marginals_gibbs(net, {{0, 7}}, cfg), InvalidEvidenceError);
}

TEST_CASE("mean-field is exact on edgeless networks") {
    GraphStructure g = binary_structure(3, {});
    LogLinearParams p = zero_params(g);
    p.unary[0] = {0.3, -0.2};
    p.unary[1] = {1.0, 0.0};
    p.unary[2] = {-0.4, 0.9};
    MarkovNetwork net(g, p);
    auto [mf, diag] = marginals_meanfield(net, {}, {});
    MarginalTable exact = marginals_exact(net, {});
    CHECK(max_abs_err(mf, exact) < 1e-9);
    CHECK(diag.converged);
}

TEST_CASE("mean-field on uniform potentials converges immediately to uniform") {
    MarkovNetwork net = MarkovNetwork::zeros(binary_structure(3, {{0, 1}, {1, 2}}));
    auto [mf, diag] = marginals_meanfield(net, {}, {});
    for (const auto& d : mf.dist) CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(diag.converged);
}

TEST_CASE("mean-field ELBO non-decreasing and close on an attractive pair") {
    GraphStructure g = binary_structure(2, {{0, 1}});
    LogLinearParams p = zero_params(g);
    p.pairwise[0][0] = 1.0;
    p.pairwise[0][3] = 1.0;
    p.unary[0][0] = 0.3;
    MarkovNetwork net(g, p);
    auto [mf, diag] = marginals_meanfield(net, {}, {});
    for (std::size_t i = 1; i < diag.elbo_trace.size(); ++i) {
        CHECK(diag.elbo_trace[i] >= diag.elbo_trace[i - 1] - 1e-8);
    }
    CHECK(max_abs_err(mf, marginals_exact(net, {})) < 0.15);
}

TEST_CASE("mean-field with damping keeps the ELBO trace monotone") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MarkovNetwork net = random_network(6, 500 + seed, 1.2);
        MeanFieldConfig cfg;
        cfg.damping = 0.4;
        auto [mf, diag] = marginals_meanfield(net, {}, cfg);
        for (std::size_t i = 1; i < diag.elbo_trace.size(); ++i) {
            CHECK(diag.elbo_trace[i] >= diag.elbo_trace[i - 1] - 1e-8);
        }
        for (const auto& d : mf.dist) {
            double s = 0.0;
            for (double x : d) s += x;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
}

TEST_CASE("predict_label is uniform on a zero-parameter star") {
    GraphStructure g = binary_structure(4, {{0, 1}, {0, 2}, {0, 3}});
    MarkovNetwork net = MarkovNetwork::zeros(g);
    std::vector<double> dist = predict_label(net, {{1, 0}, {2, 1}, {3, 0}});
    CHECK(dist[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(argmax_label(dist) == 0);  // tie resolves low
}

TEST_CASE("predict_label matches the closed-form softmax on a star") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(800 + seed);
        GraphStructure g = binary_structure(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
        LogLinearParams p = zero_params(g);
        for (auto& t : p.unary)
            for (auto& x : t) x = 2.0 * rng.next_double() - 1.0;
        for (auto& t : p.pairwise)
            for (auto& x : t) x = 2.0 * rng.next_double() - 1.0;
        MarkovNetwork net(g, p);

        EvidenceMap ev;
        for (int j = 1; j <= 4; ++j) ev[j] = rng.next_int(2);
        std::vector<double> dist = predict_label(net, ev);

        double logits[2];
        for (int y = 0; y < 2; ++y) {
            logits[y] = p.unary[0][static_cast<std::size_t>(y)];
            for (int j = 1; j <= 4; ++j) {
                logits[y] += p.pairwise[static_cast<std::size_t>(j - 1)]
                                       [static_cast<std::size_t>(y * 2 + ev[j])];
            }
        }
        double zmax = std::max(logits[0], logits[1]);
        double z = std::exp(logits[0] - zmax) + std::exp(logits[1] - zmax);
        CHECK(dist[1] == doctest::Approx(std::exp(logits[1] - zmax) / z).epsilon(1e-12));
    }
}

TEST_CASE("predict_label handles partial evidence via enumeration") {
    MarkovNetwork net = random_network(5, 61);
    EvidenceMap ev{{2, 1}};
    std::vector<double> dist = predict_label(net, ev);
    MarginalTable exact = marginals_exact(net, ev);
    CHECK(dist[0] == doctest::Approx(exact.dist[0][0]).epsilon(1e-9));
    CHECK(dist[1] == doctest::Approx(exact.dist[0][1]).epsilon(1e-9));
}

TEST_CASE("predict_label rejects label evidence") {
    MarkovNetwork net = random_network(3, 2);
    CHECK_THROWS_AS(predict_label(net, {{0, 1}}), InvalidEvidenceError);
}

TEST_CASE("gibbs consistency: more samples never much worse") {
    double worst10 = 0.0, worst20 = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        MarkovNetwork net = random_network(6, 900 + seed);
        MarginalTable exact = marginals_exact(net, {});
        GibbsConfig cfg;
        cfg.seed = derive_seed(31, seed);
        cfg.samples = 10000;
        worst10 = std::max(worst10, max_abs_err(marginals_gibbs(net, {}, cfg).first, exact));
        cfg.samples = 20000;
        worst20 = std::max(worst20, max_abs_err(marginals_gibbs(net, {}, cfg).first, exact));
    }
    CHECK(worst20 <= worst10 + 0.01);
}
