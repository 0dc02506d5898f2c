#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrfc/errors.hpp"

namespace mrfc {

struct SampleWeights {
    std::vector<double> weights;  // strictly positive, one per instance
};

struct RawDataset {
    std::vector<std::vector<double>> features;  // N rows of d values
    std::vector<int> labels;                    // in {0, 1}
    std::vector<std::string> feature_names;

    std::size_t size() const { return features.size(); }
    std::size_t dim() const { return feature_names.size(); }
};

struct BinningSpec {
    std::vector<std::vector<double>> cuts;  // per feature, strictly increasing
    int bins = 5;                           // requested K
    std::vector<std::string> feature_names;
    std::vector<bool> constant;             // warning: feature was constant on fit rows

    std::size_t dim() const { return cuts.size(); }
    int cardinality(std::size_t j) const { return static_cast<int>(cuts[j].size()) + 1; }
    bool any_constant() const;
};

struct DiscretizedDataset {
    std::vector<std::vector<int>> instances;  // N rows of bin indices
    std::vector<int> labels;
    BinningSpec spec;
    std::optional<SampleWeights> weights;

    std::size_t size() const { return instances.size(); }
    std::size_t dim() const { return spec.dim(); }
    int cardinality(std::size_t j) const { return spec.cardinality(j); }
};

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
    std::uint64_t seed = 0;
};

// Kaggle credit-card schema: header exactly Time,V1..V28,Amount,Class
// (column order free, resolution is by name). Throws SchemaError on a
// missing column, ParseError with the row number on a bad cell.
RawDataset load_creditcard_csv(const std::string& path);

// Any numeric CSV with a 'Class' column holding 0/1 labels; every other
// column is a feature.
RawDataset load_csv(const std::string& path);

// Feature-only input (a 'Class' column, when present, is read but optional;
// labels default to 0 without one). Used for scoring unlabeled rows.
RawDataset load_feature_csv(const std::string& path);

void write_csv(const std::string& path, const RawDataset& data);

// Empirical-quantile cut points at j/K (linear interpolation between order
// statistics). `rows` restricts fitting to the given indices (train only —
// the leakage rule); null means all rows. Duplicate or degenerate cuts are
// dropped, so a constant feature ends with zero cuts and cardinality 1.
BinningSpec fit_bins(const RawDataset& data, int k, const std::vector<int>* rows = nullptr);

// bin(v) = number of cut points <= v, which clamps out-of-range values to
// the edge bins.
DiscretizedDataset apply_bins(const RawDataset& data, const BinningSpec& spec);

// Sidecar document for the binning spec, same conventions as the model
// file (17-significant-digit decimals, deterministic bytes).
std::string serialize_bins(const BinningSpec& spec);
BinningSpec deserialize_bins(const std::string& text);

// Per-class proportions preserved within one instance; deterministic per
// seed; indices returned sorted ascending.
SplitIndices stratified_split(const std::vector<int>& labels, double test_frac,
                              std::uint64_t seed);

void write_split(const std::string& path, const SplitIndices& split);
SplitIndices read_split(const std::string& path);

// Keeps every minority instance and subsamples the majority without
// replacement so minority/total == ratio within one instance. Only raising
// the ratio is feasible; otherwise throws InfeasibleRatioError stating the
// achievable range.
std::vector<int> resample_indices_to_minority_ratio(const std::vector<int>& labels,
                                                    double ratio, std::uint64_t seed);
DiscretizedDataset resample_to_minority_ratio(const DiscretizedDataset& data, double ratio,
                                              std::uint64_t seed);

enum class Planted { none, xor_pair, pairwise };

struct SyntheticConfig {
    int n = 1000;
    int d = 10;
    double minority_ratio = 0.1;
    Planted planted = Planted::none;
    double noise = 0.0;  // probability of flipping the planted signal
    std::uint64_t seed = 0;

    void validate() const;
};

// Synthetic tabular generator with a known ground truth.
//
//   none      label independent of all features.
//   xor_pair  label = parity of two hidden bits s_j = [|x_j| > 0.5] on the
//             first two features, flipped with probability `noise`. The
//             bits have an asymmetric prior (P(s)=0.9), magnitudes cluster
//             away from the threshold, and the raw values stay
//             sign-symmetric, so the signal is invisible to a linear model
//             on the raw features but visible after binning.
//   pairwise  minority rows shift the mean of the first two features.
RawDataset generate_synthetic(const SyntheticConfig& cfg);

RawDataset subset(const RawDataset& data, const std::vector<int>& rows);
DiscretizedDataset subset(const DiscretizedDataset& data, const std::vector<int>& rows);

}  // namespace mrfc
