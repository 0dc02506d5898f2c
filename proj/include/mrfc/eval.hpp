#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mrfc/data.hpp"
#include "mrfc/inference.hpp"
#include "mrfc/training.hpp"

namespace mrfc {

struct ScoredPredictions {
    std::vector<double> scores;  // higher = more positive
    std::vector<int> labels;     // ground truth in {0, 1}
};

struct Confusion {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
};

// Positive prediction iff score > threshold.
Confusion confusion_at(const ScoredPredictions& preds, double threshold);

// Balanced accuracy: mean of per-class recalls. Throws UndefinedMetricError
// on single-class labels.
double weighted_accuracy(const Confusion& c);
double weighted_accuracy(const ScoredPredictions& preds, double threshold);

// Minority-class F1; 0 by convention when tp = 0 with errors present.
double f1_minority(const Confusion& c);
double f1_minority(const ScoredPredictions& preds, double threshold);

// Mann-Whitney: fraction of (positive, negative) pairs with the positive
// scored higher, ties counting one half.
double auc_roc(const ScoredPredictions& preds);

// (fpr, tpr) at every distinct score threshold, endpoints (0,0) and (1,1).
// Trapezoidal area equals auc_roc.
std::vector<std::pair<double, double>> roc_curve(const ScoredPredictions& preds);

struct MetricsReport {
    double weight_acc = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    Confusion confusion;
    double threshold = 0.5;
};

MetricsReport evaluate_predictions(const ScoredPredictions& preds, double threshold = 0.5);
std::string render_metrics_text(const MetricsReport& report);
std::string render_metrics_json(const MetricsReport& report);

// Threshold among candidate scores maximizing F1 (for reporting; never
// tuned on test data by the benchmark).
double best_f1_threshold(const ScoredPredictions& preds);

struct BaselineModel {
    std::vector<double> coef;  // one per feature, raw-feature space
    double intercept = 0.0;
    double l2_lambda = 0.0;
    int iters = 0;
    double grad_max_norm = 0.0;
};

struct LogisticOptions {
    double step_size = 1.0;
    int max_iters = 2000;
    double grad_tol = 1e-7;
};

// Weighted negative log-loss + 0.5 * l2_lambda * |coef|^2 (intercept not
// penalized), minimized by gradient descent with backtracking. Features are
// standardized internally; returned coefficients are in raw space.
BaselineModel logistic_fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           const SampleWeights& weights, double l2_lambda,
                           const LogisticOptions& options = {});

std::vector<double> logistic_predict(const BaselineModel& model,
                                     const std::vector<std::vector<double>>& x);

// Exposed for gradient checks: params = [coef..., intercept], no
// standardization. Objective is the weighted NLL plus the l2 penalty.
double logistic_objective(const std::vector<double>& params,
                          const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                          const SampleWeights& weights, double l2_lambda);
std::vector<double> logistic_gradient(const std::vector<double>& params,
                                      const std::vector<std::vector<double>>& x,
                                      const std::vector<int>& y, const SampleWeights& weights,
                                      double l2_lambda);

enum class BenchModel { markov_network, logistic_baseline };

BenchModel parse_bench_model(const std::string& name);  // ConfigError on unknown
std::string bench_model_name(BenchModel model);

struct BenchSpec {
    std::string csv_path;  // empty: use the synthetic generator
    SyntheticConfig synth;
    std::vector<double> ratios;  // empty: evaluate at the native ratio
    std::vector<BenchModel> models{BenchModel::markov_network, BenchModel::logistic_baseline};
    std::vector<std::uint64_t> seeds{42};
    InferMethod method = InferMethod::exact;
    TrainConfig train;
    double structure_lambda = -1.0;  // < 0: sqrt(N_train)
    StructureOptions structure;
    bool learn_edges = true;
    int bins = 5;
    double test_frac = 0.3;
    double threshold = 0.5;
    double baseline_l2 = 1e-3;
    bool timings = false;  // runtime_ms is measured only on request so
                           // default reports stay byte-reproducible
};

struct BenchRow {
    std::string model;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    double train_f1_threshold = 0.5;
    long long runtime_ms = -1;  // -1 renders as "na"
};

struct BenchResult {
    BenchSpec spec;
    std::vector<BenchRow> rows;
};

// One row per (ratio, model, seed). Pipeline per row: stratified split,
// per-side resampling to the target minority ratio, train-only binning,
// training, scoring the test rows.
BenchResult run_benchmark(const BenchSpec& spec);

// Aligned plain-text table with the externally published reference values
// printed alongside, labeled as not produced by this run.
std::string render_bench_table(const BenchResult& result);

// One JSON record per row: model, ratio, seed, weight_acc, f1, auc,
// threshold, runtime_ms.
std::string render_bench_records(const BenchResult& result);

}  // namespace mrfc
