#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrfc/data.hpp"
#include "mrfc/model.hpp"

namespace mrfc {

enum class Objective { exact_ll, pseudo_ll };
enum class Regularizer { none, l2, l1, elastic };
enum class WeightScheme { none, inverse_frequency, custom };

struct TrainConfig {
    Objective objective = Objective::pseudo_ll;
    Regularizer regularizer = Regularizer::none;
    double lambda = 0.0;
    double l1_ratio = 0.5;   // elastic mix: lambda * (l1_ratio*|t|_1 + (1-l1_ratio)*0.5*|t|_2^2)
    double step_size = 1.0;  // initial backtracking step
    int max_iters = 200;
    double grad_tol = 1e-5;
    WeightScheme weight_scheme = WeightScheme::none;
    std::uint64_t exact_limit = kDefaultExactLimit;

    void validate() const;
};

struct TrainTrace {
    struct Entry {
        int iter = 0;
        double objective = 0.0;      // J(theta), penalty included
        double grad_max_norm = 0.0;  // projected for l1
        bool accepted = true;
    };
    std::vector<Entry> entries;
};

// inverse_frequency: w_i = N / (C * N_c), C = number of classes, so the
// weighted count of every class equals N/C. none: all ones.
SampleWeights compute_class_weights(const std::vector<int>& labels, WeightScheme scheme);

// Resolves the scheme against a dataset (custom pulls the dataset's own
// weights).
SampleWeights resolve_weights(const DiscretizedDataset& data, WeightScheme scheme);

// Canonical flat layout: unaries by variable id then state, pairwise by
// edge order then row-major.
std::vector<double> pack_params(const MarkovNetwork& network);
LogLinearParams unpack_params(const GraphStructure& structure, const std::vector<double>& flat);

// J(theta) = sum_i w_i log P(X_i | theta) - lambda R(theta).
double objective_value(const MarkovNetwork& network, const DiscretizedDataset& data,
                       const SampleWeights& weights, const TrainConfig& cfg);

// Gradient of J in the canonical layout, regularizer subgradient included
// (l1 subgradient at zero is 0).
std::vector<double> objective_gradient(const MarkovNetwork& network, const DiscretizedDataset& data,
                                       const SampleWeights& weights, const TrainConfig& cfg);

struct FitResult {
    MarkovNetwork network;
    TrainTrace trace;
};

// Full-batch gradient ascent with Armijo backtracking on the smooth part
// and a proximal soft-threshold step for the l1 component. Weights resolve
// from cfg.weight_scheme. Throws DivergedError if the objective goes
// non-finite.
FitResult fit(const MarkovNetwork& initial, const DiscretizedDataset& data,
              const TrainConfig& cfg);
FitResult fit(const MarkovNetwork& initial, const DiscretizedDataset& data,
              const SampleWeights& weights, const TrainConfig& cfg);

struct StructureOptions {
    enum class Candidates { top_m_mutual_information, all };
    Candidates candidate_pairs = Candidates::top_m_mutual_information;
    int m = -1;              // negative: default 3 * d
    double prune_eps = 1e-3;
};

struct StructureResult {
    GraphStructure structure;      // star edges plus surviving candidates
    bool m_clamped = false;        // m exceeded the available pair count
    std::vector<Edge> candidates;  // feature-feature pairs that were tried
    std::vector<Edge> kept;        // candidates surviving the prune
};

// Starts from the star graph (label-feature edges always kept), adds the
// top-m feature-feature pairs by empirical mutual information, fits with
// l1, and drops candidates whose table has max |theta| < prune_eps.
StructureResult learn_structure(const DiscretizedDataset& data, const TrainConfig& cfg,
                                const StructureOptions& options = {});

// Label variable at id 0, features at 1..d, with cardinalities from the
// binning spec (single-bin features are clamped to two states).
GraphStructure star_structure(const DiscretizedDataset& data,
                              const std::string& label_name = "Class");

// Dataset row as a full assignment over the star layout (label first).
Assignment row_assignment(const DiscretizedDataset& data, std::size_t row);

// Empirical mutual information between two feature columns (bin indices).
double mutual_information(const DiscretizedDataset& data, int a, int b);

}  // namespace mrfc
