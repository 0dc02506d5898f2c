#include "mrfc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrfc/rng.hpp"

namespace mrfc {

void GibbsConfig::validate() const {
    if (samples < 1) throw ConfigError("gibbs samples must be >= 1");
    if (thin < 1) throw ConfigError("gibbs thin must be >= 1");
    if (burn_in < 0) throw ConfigError("gibbs burn_in must be >= 0");
}

void MeanFieldConfig::validate() const {
    if (tol <= 0) throw ConfigError("mean-field tol must be > 0");
    if (max_iters < 1) throw ConfigError("mean-field max_iters must be >= 1");
    if (damping < 0 || damping >= 1) throw ConfigError("mean-field damping must be in [0, 1)");
}

namespace {

void check_evidence(const MarkovNetwork& net, const EvidenceMap& evidence) {
    int n = static_cast<int>(net.num_variables());
    for (const auto& [id, state] : evidence) {
        if (id < 0 || id >= n) {
            throw InvalidEvidenceError("evidence references unknown variable " + std::to_string(id));
        }
        if (state < 0 || state >= net.cardinality(id)) {
            throw InvalidEvidenceError("evidence state " + std::to_string(state) +
                                       " out of range for variable " + std::to_string(id));
        }
    }
}

std::vector<int> unobserved_ids(const MarkovNetwork& net, const EvidenceMap& evidence) {
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(net.num_variables()); ++v) {
        if (!evidence.count(v)) out.push_back(v);
    }
    return out;
}

// Conditional over states of `v` given the rest of `a`, written into `probs`.
void conditional_dist(const MarkovNetwork& net, const Assignment& a, int v,
                      std::vector<double>& probs) {
    int card = net.cardinality(v);
    probs.assign(static_cast<std::size_t>(card), 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < card; ++k) {
        double e = net.params().unary[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)];
        for (const auto& nb : net.adjacency()[static_cast<std::size_t>(v)]) {
            e += net.edge_theta(nb.edge, v, k, a[static_cast<std::size_t>(nb.neighbor)]);
        }
        probs[static_cast<std::size_t>(k)] = e;
        mx = std::max(mx, e);
    }
    double total = 0.0;
    for (double& p : probs) {
        p = std::exp(p - mx);
        total += p;
    }
    for (double& p : probs) p /= total;
}

}  // namespace

MarginalTable marginals_exact(const MarkovNetwork& network, const EvidenceMap& evidence,
                              std::uint64_t limit) {
    check_evidence(network, evidence);
    std::vector<int> free = unobserved_ids(network, evidence);

    std::uint64_t states = 1;
    for (int v : free) {
        states *= static_cast<std::uint64_t>(network.cardinality(v));
        if (states > limit) {
            throw TooLargeError("unobserved state space exceeds exact limit of " +
                                std::to_string(limit) + " states");
        }
    }

    std::size_t n = network.num_variables();
    Assignment a(n, 0);
    for (const auto& [id, st] : evidence) a[static_cast<std::size_t>(id)] = st;

    auto enumerate = [&](auto&& fn) {
        for (int v : free) a[static_cast<std::size_t>(v)] = 0;
        while (true) {
            fn();
            std::size_t i = free.size();
            while (true) {
                if (i == 0) return;
                --i;
                int v = free[i];
                if (++a[static_cast<std::size_t>(v)] < network.cardinality(v)) break;
                a[static_cast<std::size_t>(v)] = 0;
            }
        }
    };

    // Pass 1: max log score for stable exponentiation.
    double mx = -std::numeric_limits<double>::infinity();
    enumerate([&] { mx = std::max(mx, log_score(network, a)); });

    // Pass 2: accumulate per-state masses.
    MarginalTable table;
    table.dist.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        table.dist[v].assign(static_cast<std::size_t>(network.cardinality(static_cast<int>(v))), 0.0);
    }
    double total = 0.0;
    enumerate([&] {
        double w = std::exp(log_score(network, a) - mx);
        total += w;
        for (std::size_t v = 0; v < n; ++v) {
            table.dist[v][static_cast<std::size_t>(a[v])] += w;
        }
    });
    for (auto& d : table.dist) {
        for (double& p : d) p /= total;
    }
    return table;
}

std::pair<MarginalTable, InferenceDiagnostics> marginals_gibbs(const MarkovNetwork& network,
                                                               const EvidenceMap& evidence,
                                                               const GibbsConfig& cfg) {
    cfg.validate();
    check_evidence(network, evidence);
    std::vector<int> free = unobserved_ids(network, evidence);
    if (free.empty()) {
        throw InvalidEvidenceError("gibbs sampling requires at least one unobserved variable");
    }

    std::size_t n = network.num_variables();
    Assignment a(n, 0);
    for (const auto& [id, st] : evidence) a[static_cast<std::size_t>(id)] = st;

    Rng rng(cfg.seed);
    for (int v : free) {
        a[static_cast<std::size_t>(v)] = rng.next_int(network.cardinality(v));
    }

    std::vector<std::vector<long long>> counts(n);
    for (std::size_t v = 0; v < n; ++v) {
        counts[v].assign(static_cast<std::size_t>(network.cardinality(static_cast<int>(v))), 0);
    }

    std::vector<double> probs;
    auto sweep = [&] {
        for (int v : free) {
            conditional_dist(network, a, v, probs);
            double u = rng.next_double();
            double acc = 0.0;
            int chosen = static_cast<int>(probs.size()) - 1;
            for (std::size_t k = 0; k < probs.size(); ++k) {
                acc += probs[k];
                if (u < acc) {
                    chosen = static_cast<int>(k);
                    break;
                }
            }
            a[static_cast<std::size_t>(v)] = chosen;
        }
    };

    for (int i = 0; i < cfg.burn_in; ++i) sweep();
    for (int s = 0; s < cfg.samples; ++s) {
        for (int t = 0; t < cfg.thin; ++t) sweep();
        for (int v : free) {
            ++counts[static_cast<std::size_t>(v)][static_cast<std::size_t>(a[static_cast<std::size_t>(v)])];
        }
    }

    MarginalTable table;
    table.dist.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        auto it = evidence.find(static_cast<int>(v));
        table.dist[v].assign(static_cast<std::size_t>(network.cardinality(static_cast<int>(v))), 0.0);
        if (it != evidence.end()) {
            table.dist[v][static_cast<std::size_t>(it->second)] = 1.0;
        } else {
            for (std::size_t k = 0; k < table.dist[v].size(); ++k) {
                table.dist[v][k] = static_cast<double>(counts[v][k]) / static_cast<double>(cfg.samples);
            }
        }
    }

    InferenceDiagnostics diag;
    diag.method = InferMethod::gibbs;
    diag.iterations = cfg.burn_in + cfg.samples * cfg.thin;
    diag.converged = true;
    return {std::move(table), std::move(diag)};
}

namespace {

// ELBO of the factorized approximation against the (unnormalized) network
// conditioned on evidence. Observed variables enter as point masses with
// zero entropy.
double mean_field_elbo(const MarkovNetwork& net, const std::vector<std::vector<double>>& q) {
    double elbo = 0.0;
    std::size_t n = net.num_variables();
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t k = 0; k < q[v].size(); ++k) {
            double p = q[v][k];
            if (p <= 0.0) continue;
            elbo += p * net.params().unary[v][k];
            elbo -= p * std::log(p);
        }
    }
    const auto& edges = net.structure().edges;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        std::size_t u = static_cast<std::size_t>(edges[e].u);
        std::size_t v = static_cast<std::size_t>(edges[e].v);
        int cv = net.cardinality(edges[e].v);
        for (std::size_t k = 0; k < q[u].size(); ++k) {
            if (q[u][k] == 0.0) continue;
            for (std::size_t l = 0; l < q[v].size(); ++l) {
                if (q[v][l] == 0.0) continue;
                elbo += q[u][k] * q[v][l] *
                        net.params().pairwise[e][k * static_cast<std::size_t>(cv) + l];
            }
        }
    }
    return elbo;
}

}  // namespace

std::pair<MarginalTable, InferenceDiagnostics> marginals_meanfield(const MarkovNetwork& network,
                                                                   const EvidenceMap& evidence,
                                                                   const MeanFieldConfig& cfg) {
    cfg.validate();
    check_evidence(network, evidence);
    std::vector<int> free = unobserved_ids(network, evidence);

    std::size_t n = network.num_variables();
    std::vector<std::vector<double>> q(n);
    for (std::size_t v = 0; v < n; ++v) {
        int card = network.cardinality(static_cast<int>(v));
        auto it = evidence.find(static_cast<int>(v));
        if (it != evidence.end()) {
            q[v].assign(static_cast<std::size_t>(card), 0.0);
            q[v][static_cast<std::size_t>(it->second)] = 1.0;
        } else {
            q[v].assign(static_cast<std::size_t>(card), 1.0 / card);
        }
    }

    InferenceDiagnostics diag;
    diag.method = InferMethod::meanfield;
    diag.converged = false;

    double elbo = mean_field_elbo(network, q);
    diag.elbo_trace.push_back(elbo);

    std::vector<double> updated;
    for (int pass = 0; pass < cfg.max_iters; ++pass) {
        double max_change = 0.0;
        for (int v : free) {
            std::size_t vi = static_cast<std::size_t>(v);
            int card = network.cardinality(v);
            updated.assign(static_cast<std::size_t>(card), 0.0);
            double mx = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < card; ++k) {
                double e = network.params().unary[vi][static_cast<std::size_t>(k)];
                for (const auto& nb : network.adjacency()[vi]) {
                    const auto& qu = q[static_cast<std::size_t>(nb.neighbor)];
                    for (std::size_t l = 0; l < qu.size(); ++l) {
                        if (qu[l] == 0.0) continue;
                        e += qu[l] * network.edge_theta(nb.edge, v, k, static_cast<int>(l));
                    }
                }
                updated[static_cast<std::size_t>(k)] = e;
                mx = std::max(mx, e);
            }
            double total = 0.0;
            for (double& p : updated) {
                p = std::exp(p - mx);
                total += p;
            }
            for (double& p : updated) p /= total;

            std::vector<double> prev = q[vi];
            if (cfg.damping > 0.0) {
                for (std::size_t k = 0; k < updated.size(); ++k) {
                    q[vi][k] = (1.0 - cfg.damping) * updated[k] + cfg.damping * prev[k];
                }
                double damped_elbo = mean_field_elbo(network, q);
                if (damped_elbo < elbo) {
                    // Exact coordinate update never lowers the ELBO.
                    q[vi] = updated;
                    damped_elbo = mean_field_elbo(network, q);
                }
                elbo = damped_elbo;
            } else {
                q[vi] = updated;
                elbo = mean_field_elbo(network, q);
            }
            diag.elbo_trace.push_back(elbo);
            for (std::size_t k = 0; k < q[vi].size(); ++k) {
                max_change = std::max(max_change, std::abs(q[vi][k] - prev[k]));
            }
        }
        diag.iterations = pass + 1;
        if (max_change < cfg.tol) {
            diag.converged = true;
            break;
        }
    }

    MarginalTable table;
    table.dist = std::move(q);
    return {std::move(table), std::move(diag)};
}

std::vector<double> predict_label(const MarkovNetwork& network,
                                  const EvidenceMap& feature_evidence,
                                  const PredictConfig& cfg) {
    int label = network.label_id();
    if (feature_evidence.count(label)) {
        throw InvalidEvidenceError("label variable " + std::to_string(label) +
                                   " must not appear in the evidence");
    }
    switch (cfg.method) {
        case InferMethod::exact:
            return marginals_exact(network, feature_evidence, cfg.exact_limit)
                .dist[static_cast<std::size_t>(label)];
        case InferMethod::gibbs:
            return marginals_gibbs(network, feature_evidence, cfg.gibbs)
                .first.dist[static_cast<std::size_t>(label)];
        case InferMethod::meanfield:
            return marginals_meanfield(network, feature_evidence, cfg.meanfield)
                .first.dist[static_cast<std::size_t>(label)];
    }
    throw ConfigError("unknown inference method");
}

int argmax_label(const std::vector<double>& dist) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(dist.size()); ++k) {
        if (dist[static_cast<std::size_t>(k)] > dist[static_cast<std::size_t>(best)]) best = k;
    }
    return best;
}

}  // namespace mrfc
