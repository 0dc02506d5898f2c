#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "mrfc/model.hpp"

namespace mrfc {

// variable id -> observed state
using EvidenceMap = std::map<int, int>;

struct MarginalTable {
    // One categorical distribution per variable; observed variables hold a
    // point mass. Every distribution sums to 1 within 1e-6.
    std::vector<std::vector<double>> dist;
};

struct GibbsConfig {
    std::uint64_t seed = 0;
    int burn_in = 1000;
    int samples = 5000;
    int thin = 1;

    void validate() const;
};

struct MeanFieldConfig {
    double tol = 1e-6;
    int max_iters = 500;
    double damping = 0.0;  // in [0, 1)

    void validate() const;
};

enum class InferMethod { exact, gibbs, meanfield };

struct InferenceDiagnostics {
    InferMethod method = InferMethod::exact;
    int iterations = 0;  // sweeps (Gibbs) or passes (mean-field)
    bool converged = true;
    // Mean-field only: ELBO after every accepted coordinate update,
    // non-decreasing within 1e-8.
    std::vector<double> elbo_trace;
};

// Conditional marginals by enumeration over the unobserved variables.
// Throws TooLargeError beyond `limit`, InvalidEvidenceError on bad evidence.
MarginalTable marginals_exact(const MarkovNetwork& network, const EvidenceMap& evidence,
                              std::uint64_t limit = kDefaultExactLimit);

// Systematic-scan Gibbs sampler: ascending variable id within a sweep,
// uniform seeded initial state, empirical frequencies over retained sweeps.
// Deterministic per seed.
std::pair<MarginalTable, InferenceDiagnostics> marginals_gibbs(const MarkovNetwork& network,
                                                               const EvidenceMap& evidence,
                                                               const GibbsConfig& cfg);

// Fully factorized coordinate ascent, ascending id. A damped update that
// would lower the ELBO falls back to the exact (undamped) update, so the
// trace stays monotone.
std::pair<MarginalTable, InferenceDiagnostics> marginals_meanfield(const MarkovNetwork& network,
                                                                   const EvidenceMap& evidence,
                                                                   const MeanFieldConfig& cfg);

struct PredictConfig {
    InferMethod method = InferMethod::exact;
    GibbsConfig gibbs;
    MeanFieldConfig meanfield;
    std::uint64_t exact_limit = kDefaultExactLimit;
};

// P(label | feature evidence) as a normalized distribution. The label must
// not appear in the evidence.
std::vector<double> predict_label(const MarkovNetwork& network,
                                  const EvidenceMap& feature_evidence,
                                  const PredictConfig& cfg = {});

// Ties resolve to the lower label index.
int argmax_label(const std::vector<double>& dist);

}  // namespace mrfc
