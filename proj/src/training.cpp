#include "mrfc/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mrfc {

void TrainConfig::validate() const {
    if (lambda < 0) throw ConfigError("lambda must be >= 0");
    if (l1_ratio < 0 || l1_ratio > 1) throw ConfigError("l1_ratio must be in [0, 1]");
    if (step_size <= 0) throw ConfigError("step_size must be > 0");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (grad_tol <= 0) throw ConfigError("grad_tol must be > 0");
}

SampleWeights compute_class_weights(const std::vector<int>& labels, WeightScheme scheme) {
    if (labels.empty()) throw Error("labels must be non-empty");
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
    }
    SampleWeights w;
    if (scheme == WeightScheme::none) {
        w.weights.assign(labels.size(), 1.0);
        return w;
    }
    if (scheme == WeightScheme::custom) {
        throw ConfigError("custom weights must be supplied with the dataset, not computed");
    }
    long long counts[2] = {0, 0};
    for (int y : labels) ++counts[y];
    if (counts[0] == 0 || counts[1] == 0) {
        throw DegenerateClassError("inverse_frequency weighting requires both classes present");
    }
    double n = static_cast<double>(labels.size());
    double per_class[2] = {n / (2.0 * static_cast<double>(counts[0])),
                           n / (2.0 * static_cast<double>(counts[1]))};
    w.weights.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        w.weights[i] = per_class[labels[i]];
    }
    return w;
}

SampleWeights resolve_weights(const DiscretizedDataset& data, WeightScheme scheme) {
    if (scheme == WeightScheme::custom) {
        if (!data.weights) throw ConfigError("weight scheme 'custom' but dataset carries no weights");
        if (data.weights->weights.size() != data.size()) {
            throw ConfigError("dataset weight count does not match instance count");
        }
        return *data.weights;
    }
    return compute_class_weights(data.labels, scheme);
}

std::vector<double> pack_params(const MarkovNetwork& network) {
    std::vector<double> flat;
    for (const auto& t : network.params().unary) flat.insert(flat.end(), t.begin(), t.end());
    for (const auto& t : network.params().pairwise) flat.insert(flat.end(), t.begin(), t.end());
    return flat;
}

LogLinearParams unpack_params(const GraphStructure& structure, const std::vector<double>& flat) {
    LogLinearParams p = zero_params(structure);
    std::size_t pos = 0;
    for (auto& t : p.unary) {
        for (double& x : t) x = flat.at(pos++);
    }
    for (auto& t : p.pairwise) {
        for (double& x : t) x = flat.at(pos++);
    }
    if (pos != flat.size()) throw Error("flat parameter vector has wrong length");
    return p;
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// Objective/gradient engine over a fixed structure and dataset. Works on the
// canonical flat parameter vector so the optimizer never rebuilds networks.
class Evaluator {
public:
    Evaluator(const GraphStructure& structure, const DiscretizedDataset& data,
              const SampleWeights& weights, const TrainConfig& cfg)
        : structure_(structure), cfg_(cfg), weights_(weights.weights) {
        structure_.validate();
        if (weights_.size() != data.size()) {
            throw Error("sample weight count does not match instance count");
        }
        for (double w : weights_) {
            if (!(w > 0)) throw Error("sample weights must be strictly positive");
        }

        label_ = structure_.label_id();
        n_vars_ = structure_.variables.size();
        cards_.resize(n_vars_);
        for (std::size_t v = 0; v < n_vars_; ++v) cards_[v] = structure_.variables[v].cardinality;

        // variable id for each dataset column: non-label ids ascending
        std::vector<int> column_var;
        for (int v = 0; v < static_cast<int>(n_vars_); ++v) {
            if (v != label_) column_var.push_back(v);
        }
        if (column_var.size() != data.dim()) {
            throw Error("dataset feature count does not match network variable count");
        }

        rows_.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            Assignment a(n_vars_, 0);
            int y = data.labels[i];
            if (y < 0 || y >= cards_[static_cast<std::size_t>(label_)]) {
                throw Error("label out of range at row " + std::to_string(i));
            }
            a[static_cast<std::size_t>(label_)] = y;
            for (std::size_t j = 0; j < data.dim(); ++j) {
                int st = data.instances[i][j];
                std::size_t v = static_cast<std::size_t>(column_var[j]);
                if (st < 0 || st >= cards_[v]) {
                    throw Error("bin index out of range at row " + std::to_string(i) +
                                ", column " + std::to_string(j));
                }
                a[v] = st;
            }
            rows_[i] = std::move(a);
        }

        // flat layout offsets
        unary_off_.resize(n_vars_);
        std::size_t pos = 0;
        for (std::size_t v = 0; v < n_vars_; ++v) {
            unary_off_[v] = pos;
            pos += static_cast<std::size_t>(cards_[v]);
        }
        pair_off_.resize(structure_.edges.size());
        for (std::size_t e = 0; e < structure_.edges.size(); ++e) {
            pair_off_[e] = pos;
            const Edge& ed = structure_.edges[e];
            pos += static_cast<std::size_t>(cards_[static_cast<std::size_t>(ed.u)]) *
                   static_cast<std::size_t>(cards_[static_cast<std::size_t>(ed.v)]);
        }
        n_params_ = pos;

        adjacency_.assign(n_vars_, {});
        for (std::size_t e = 0; e < structure_.edges.size(); ++e) {
            const Edge& ed = structure_.edges[e];
            adjacency_[static_cast<std::size_t>(ed.u)].push_back({ed.v, static_cast<int>(e)});
            adjacency_[static_cast<std::size_t>(ed.v)].push_back({ed.u, static_cast<int>(e)});
        }

        total_weight_ = 0.0;
        for (double w : weights_) total_weight_ += w;
    }

    std::size_t num_params() const { return n_params_; }

    double l1_weight() const {
        if (cfg_.regularizer == Regularizer::l1) return cfg_.lambda;
        if (cfg_.regularizer == Regularizer::elastic) return cfg_.lambda * cfg_.l1_ratio;
        return 0.0;
    }

    double l2_weight() const {
        if (cfg_.regularizer == Regularizer::l2) return cfg_.lambda;
        if (cfg_.regularizer == Regularizer::elastic) return cfg_.lambda * (1.0 - cfg_.l1_ratio);
        return 0.0;
    }

    // Weighted log-likelihood plus the smooth (l2) regularizer part.
    double smooth_value(const std::vector<double>& x) const {
        double val = cfg_.objective == Objective::exact_ll ? exact_loglik(x) : pseudo_loglik(x);
        double l2 = l2_weight();
        if (l2 > 0) {
            double ss = 0.0;
            for (double t : x) ss += t * t;
            val -= l2 * 0.5 * ss;
        }
        return val;
    }

    std::vector<double> smooth_gradient(const std::vector<double>& x) const {
        std::vector<double> g = cfg_.objective == Objective::exact_ll ? exact_grad(x)
                                                                      : pseudo_grad(x);
        double l2 = l2_weight();
        if (l2 > 0) {
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= l2 * x[i];
        }
        return g;
    }

    double full_value(const std::vector<double>& x) const {
        double val = smooth_value(x);
        double l1 = l1_weight();
        if (l1 > 0) {
            double s = 0.0;
            for (double t : x) s += std::abs(t);
            val -= l1 * s;
        }
        return val;
    }

    // Gradient with the regularizer subgradient included (0 at theta = 0).
    std::vector<double> full_gradient(const std::vector<double>& x) const {
        std::vector<double> g = smooth_gradient(x);
        double l1 = l1_weight();
        if (l1 > 0) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (x[i] > 0) {
                    g[i] -= l1;
                } else if (x[i] < 0) {
                    g[i] += l1;
                }
            }
        }
        return g;
    }

    // Termination/trace norm: the smooth gradient, projected for l1.
    double projected_grad_maxnorm(const std::vector<double>& x,
                                  const std::vector<double>& smooth_grad) const {
        double l1 = l1_weight();
        double mx = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double pg;
            if (l1 == 0.0) {
                pg = smooth_grad[i];
            } else if (x[i] != 0.0) {
                pg = smooth_grad[i] - l1 * (x[i] > 0 ? 1.0 : -1.0);
            } else {
                pg = soft_threshold(smooth_grad[i], l1);
            }
            mx = std::max(mx, std::abs(pg));
        }
        return mx;
    }

private:
    double theta_u(const std::vector<double>& x, std::size_t v, int k) const {
        return x[unary_off_[v] + static_cast<std::size_t>(k)];
    }
    std::size_t pair_index(std::size_t e, int su, int sv) const {
        const Edge& ed = structure_.edges[e];
        return pair_off_[e] +
               static_cast<std::size_t>(su) *
                   static_cast<std::size_t>(cards_[static_cast<std::size_t>(ed.v)]) +
               static_cast<std::size_t>(sv);
    }
    // theta of edge e with this-side variable `v` in state k, other side in
    // state `other`.
    double theta_e(const std::vector<double>& x, std::size_t e, int v, int k, int other) const {
        const Edge& ed = structure_.edges[e];
        return ed.u == v ? x[pair_index(e, k, other)] : x[pair_index(e, other, k)];
    }

    double assignment_score(const std::vector<double>& x, const Assignment& a) const {
        double s = 0.0;
        for (std::size_t v = 0; v < n_vars_; ++v) s += theta_u(x, v, a[v]);
        for (std::size_t e = 0; e < structure_.edges.size(); ++e) {
            const Edge& ed = structure_.edges[e];
            s += x[pair_index(e, a[static_cast<std::size_t>(ed.u)], a[static_cast<std::size_t>(ed.v)])];
        }
        return s;
    }

    template <typename Fn>
    void for_each_joint(Fn&& fn) const {
        Assignment a(n_vars_, 0);
        while (true) {
            fn(a);
            std::size_t i = n_vars_;
            while (true) {
                if (i == 0) return;
                --i;
                if (++a[i] < cards_[i]) break;
                a[i] = 0;
            }
        }
    }

    void check_exact_limit() const {
        std::uint64_t total = 1;
        for (int c : cards_) {
            total *= static_cast<std::uint64_t>(c);
            if (total > cfg_.exact_limit) {
                throw TooLargeError("joint state space exceeds exact limit of " +
                                    std::to_string(cfg_.exact_limit) + " states");
            }
        }
    }

    double log_partition(const std::vector<double>& x) const {
        check_exact_limit();
        double m = -std::numeric_limits<double>::infinity();
        double acc = 0.0;
        for_each_joint([&](const Assignment& a) {
            double ls = assignment_score(x, a);
            if (ls <= m) {
                acc += std::exp(ls - m);
            } else {
                acc = acc * std::exp(m - ls) + 1.0;
                m = ls;
            }
        });
        return m + std::log(acc);
    }

    double exact_loglik(const std::vector<double>& x) const {
        double lz = log_partition(x);
        double val = 0.0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            val += weights_[i] * (assignment_score(x, rows_[i]) - lz);
        }
        return val;
    }

    std::vector<double> exact_grad(const std::vector<double>& x) const {
        double lz = log_partition(x);
        std::vector<double> g(n_params_, 0.0);
        // weighted empirical counts
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const Assignment& a = rows_[i];
            double w = weights_[i];
            for (std::size_t v = 0; v < n_vars_; ++v) {
                g[unary_off_[v] + static_cast<std::size_t>(a[v])] += w;
            }
            for (std::size_t e = 0; e < structure_.edges.size(); ++e) {
                const Edge& ed = structure_.edges[e];
                g[pair_index(e, a[static_cast<std::size_t>(ed.u)], a[static_cast<std::size_t>(ed.v)])] += w;
            }
        }
        // minus total-weight-scaled model expectations
        for_each_joint([&](const Assignment& a) {
            double p = std::exp(assignment_score(x, a) - lz);
            double scaled = total_weight_ * p;
            for (std::size_t v = 0; v < n_vars_; ++v) {
                g[unary_off_[v] + static_cast<std::size_t>(a[v])] -= scaled;
            }
            for (std::size_t e = 0; e < structure_.edges.size(); ++e) {
                const Edge& ed = structure_.edges[e];
                g[pair_index(e, a[static_cast<std::size_t>(ed.u)], a[static_cast<std::size_t>(ed.v)])] -= scaled;
            }
        });
        return g;
    }

    // eta_v(k) = theta_v[k] + sum over neighbors of theta_e(k, neighbor state)
    void conditional_energies(const std::vector<double>& x, const Assignment& a, std::size_t v,
                              std::vector<double>& eta) const {
        int card = cards_[v];
        eta.assign(static_cast<std::size_t>(card), 0.0);
        for (int k = 0; k < card; ++k) {
            double e = theta_u(x, v, k);
            for (const auto& nb : adjacency_[v]) {
                e += theta_e(x, static_cast<std::size_t>(nb.edge), static_cast<int>(v), k,
                             a[static_cast<std::size_t>(nb.neighbor)]);
            }
            eta[static_cast<std::size_t>(k)] = e;
        }
    }

    double pseudo_loglik(const std::vector<double>& x) const {
        double val = 0.0;
        std::vector<double> eta;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const Assignment& a = rows_[i];
            double row_val = 0.0;
            for (std::size_t v = 0; v < n_vars_; ++v) {
                conditional_energies(x, a, v, eta);
                double mx = *std::max_element(eta.begin(), eta.end());
                double lse = 0.0;
                for (double e : eta) lse += std::exp(e - mx);
                lse = mx + std::log(lse);
                row_val += eta[static_cast<std::size_t>(a[v])] - lse;
            }
            val += weights_[i] * row_val;
        }
        return val;
    }

    std::vector<double> pseudo_grad(const std::vector<double>& x) const {
        std::vector<double> g(n_params_, 0.0);
        std::vector<double> eta, p;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const Assignment& a = rows_[i];
            double w = weights_[i];
            for (std::size_t v = 0; v < n_vars_; ++v) {
                conditional_energies(x, a, v, eta);
                double mx = *std::max_element(eta.begin(), eta.end());
                p.assign(eta.size(), 0.0);
                double total = 0.0;
                for (std::size_t k = 0; k < eta.size(); ++k) {
                    p[k] = std::exp(eta[k] - mx);
                    total += p[k];
                }
                for (double& pk : p) pk /= total;

                for (std::size_t k = 0; k < p.size(); ++k) {
                    double delta = (static_cast<int>(k) == a[v] ? 1.0 : 0.0) - p[k];
                    if (delta == 0.0) continue;
                    double contrib = w * delta;
                    g[unary_off_[v] + k] += contrib;
                    for (const auto& nb : adjacency_[v]) {
                        std::size_t e = static_cast<std::size_t>(nb.edge);
                        const Edge& ed = structure_.edges[e];
                        int other = a[static_cast<std::size_t>(nb.neighbor)];
                        std::size_t idx = ed.u == static_cast<int>(v)
                                              ? pair_index(e, static_cast<int>(k), other)
                                              : pair_index(e, other, static_cast<int>(k));
                        g[idx] += contrib;
                    }
                }
            }
        }
        return g;
    }

    GraphStructure structure_;
    TrainConfig cfg_;
    std::vector<double> weights_;
    std::vector<Assignment> rows_;
    std::vector<int> cards_;
    std::vector<std::size_t> unary_off_, pair_off_;
    struct Nb {
        int neighbor;
        int edge;
    };
    std::vector<std::vector<Nb>> adjacency_;
    std::size_t n_vars_ = 0, n_params_ = 0;
    int label_ = 0;
    double total_weight_ = 0.0;
};

}  // namespace

double objective_value(const MarkovNetwork& network, const DiscretizedDataset& data,
                       const SampleWeights& weights, const TrainConfig& cfg) {
    cfg.validate();
    Evaluator eval(network.structure(), data, weights, cfg);
    return eval.full_value(pack_params(network));
}

std::vector<double> objective_gradient(const MarkovNetwork& network, const DiscretizedDataset& data,
                                       const SampleWeights& weights, const TrainConfig& cfg) {
    cfg.validate();
    Evaluator eval(network.structure(), data, weights, cfg);
    return eval.full_gradient(pack_params(network));
}

FitResult fit(const MarkovNetwork& initial, const DiscretizedDataset& data,
              const TrainConfig& cfg) {
    return fit(initial, data, resolve_weights(data, cfg.weight_scheme), cfg);
}

FitResult fit(const MarkovNetwork& initial, const DiscretizedDataset& data,
              const SampleWeights& weights, const TrainConfig& cfg) {
    cfg.validate();
    Evaluator eval(initial.structure(), data, weights, cfg);

    std::vector<double> x = pack_params(initial);
    double l1w = eval.l1_weight();
    double value = eval.full_value(x);
    if (!std::isfinite(value)) {
        throw DivergedError("objective non-finite at iteration 0");
    }

    TrainTrace trace;
    double step = cfg.step_size;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        std::vector<double> g = eval.smooth_gradient(x);
        for (double gi : g) {
            if (!std::isfinite(gi)) {
                throw DivergedError("gradient non-finite at iteration " + std::to_string(iter));
            }
        }
        double gnorm = eval.projected_grad_maxnorm(x, g);
        if (gnorm < cfg.grad_tol) break;

        bool accepted = false;
        std::vector<double> candidate(x.size());
        double cand_value = value;
        double t = step;
        while (t > 1e-14) {
            double move_sq = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                double xi = x[i] + t * g[i];
                candidate[i] = l1w > 0 ? soft_threshold(xi, t * l1w) : xi;
                double dx = candidate[i] - x[i];
                move_sq += dx * dx;
            }
            double trial = eval.full_value(candidate);
            if (std::isfinite(trial) && trial >= value + kArmijo * move_sq / t) {
                accepted = true;
                cand_value = trial;
                break;
            }
            t *= kShrink;
        }

        if (accepted) {
            x.swap(candidate);
            value = cand_value;
            step = std::min(cfg.step_size, t * 2.0);  // warm-started step
        }
        trace.entries.push_back({iter, value, gnorm, accepted});
        if (!accepted) break;  // no admissible step remains
    }

    MarkovNetwork fitted(initial.structure(), unpack_params(initial.structure(), x));
    return {std::move(fitted), std::move(trace)};
}

GraphStructure star_structure(const DiscretizedDataset& data, const std::string& label_name) {
    GraphStructure s;
    VariableSpec label;
    label.id = 0;
    label.name = label_name;
    label.cardinality = 2;
    label.role = VarRole::label;
    s.variables.push_back(std::move(label));
    for (std::size_t j = 0; j < data.dim(); ++j) {
        VariableSpec v;
        v.id = static_cast<int>(j) + 1;
        v.name = data.spec.feature_names[j];
        // single-bin (constant) features keep a dummy second state
        v.cardinality = std::max(2, data.cardinality(j));
        v.role = VarRole::feature;
        s.variables.push_back(std::move(v));
        s.edges.push_back({0, static_cast<int>(j) + 1});
    }
    s.validate();
    return s;
}

Assignment row_assignment(const DiscretizedDataset& data, std::size_t row) {
    Assignment a;
    a.reserve(data.dim() + 1);
    a.push_back(data.labels[row]);
    for (std::size_t j = 0; j < data.dim(); ++j) a.push_back(data.instances[row][j]);
    return a;
}

double mutual_information(const DiscretizedDataset& data, int a, int b) {
    int ca = std::max(2, data.cardinality(static_cast<std::size_t>(a)));
    int cb = std::max(2, data.cardinality(static_cast<std::size_t>(b)));
    std::vector<double> joint(static_cast<std::size_t>(ca * cb), 0.0);
    std::vector<double> pa(static_cast<std::size_t>(ca), 0.0), pb(static_cast<std::size_t>(cb), 0.0);
    double n = static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        int sa = data.instances[i][static_cast<std::size_t>(a)];
        int sb = data.instances[i][static_cast<std::size_t>(b)];
        joint[static_cast<std::size_t>(sa * cb + sb)] += 1.0;
        pa[static_cast<std::size_t>(sa)] += 1.0;
        pb[static_cast<std::size_t>(sb)] += 1.0;
    }
    double mi = 0.0;
    for (int sa = 0; sa < ca; ++sa) {
        for (int sb = 0; sb < cb; ++sb) {
            double pj = joint[static_cast<std::size_t>(sa * cb + sb)] / n;
            if (pj <= 0.0) continue;
            mi += pj * std::log(pj / ((pa[static_cast<std::size_t>(sa)] / n) *
                                      (pb[static_cast<std::size_t>(sb)] / n)));
        }
    }
    return std::max(0.0, mi);
}

StructureResult learn_structure(const DiscretizedDataset& data, const TrainConfig& cfg,
                                const StructureOptions& options) {
    cfg.validate();
    if (data.size() == 0) throw Error("cannot learn structure from an empty dataset");
    int d = static_cast<int>(data.dim());

    // rank feature-feature pairs by empirical mutual information
    struct Scored {
        double mi;
        Edge pair;  // dataset column indices
    };
    std::vector<Scored> scored;
    for (int a = 0; a < d; ++a) {
        for (int b = a + 1; b < d; ++b) {
            scored.push_back({mutual_information(data, a, b), {a, b}});
        }
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
        if (x.mi != y.mi) return x.mi > y.mi;
        return x.pair < y.pair;
    });

    StructureResult result;
    std::size_t take = scored.size();
    if (options.candidate_pairs == StructureOptions::Candidates::top_m_mutual_information) {
        long long m = options.m < 0 ? 3LL * d : options.m;
        if (m < 0) throw ConfigError("candidate pair count m must be >= 0");
        if (m > static_cast<long long>(scored.size())) {
            result.m_clamped = true;
            m = static_cast<long long>(scored.size());
        }
        take = static_cast<std::size_t>(m);
    }

    GraphStructure structure = star_structure(data);
    for (std::size_t i = 0; i < take; ++i) {
        // dataset columns j map to variable ids j + 1
        result.candidates.push_back({scored[i].pair.u + 1, scored[i].pair.v + 1});
    }
    std::vector<Edge> all_edges = structure.edges;
    all_edges.insert(all_edges.end(), result.candidates.begin(), result.candidates.end());
    std::sort(all_edges.begin(), all_edges.end());
    structure.edges = all_edges;
    structure.validate();

    if (result.candidates.empty()) {
        result.structure = std::move(structure);
        return result;
    }

    TrainConfig fit_cfg = cfg;
    if (fit_cfg.regularizer != Regularizer::l1 && fit_cfg.regularizer != Regularizer::elastic) {
        fit_cfg.regularizer = Regularizer::l1;
    }
    FitResult fitted = fit(MarkovNetwork::zeros(structure), data, fit_cfg);

    const GraphStructure& fs = fitted.network.structure();
    std::vector<Edge> kept_edges;
    for (std::size_t e = 0; e < fs.edges.size(); ++e) {
        const Edge& ed = fs.edges[e];
        bool is_candidate =
            std::find(result.candidates.begin(), result.candidates.end(), ed) != result.candidates.end();
        if (!is_candidate) {
            kept_edges.push_back(ed);  // star edges always survive
            continue;
        }
        double mx = 0.0;
        for (double t : fitted.network.params().pairwise[e]) mx = std::max(mx, std::abs(t));
        if (mx >= options.prune_eps) {
            kept_edges.push_back(ed);
            result.kept.push_back(ed);
        }
    }
    structure.edges = std::move(kept_edges);
    structure.validate();
    result.structure = std::move(structure);
    return result;
}

}  // namespace mrfc
