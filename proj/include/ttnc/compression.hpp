#ifndef TTNC_COMPRESSION_HPP
#define TTNC_COMPRESSION_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttnc/model.hpp"

namespace ttnc {

/// Bond-dimension reduction target. `chi_per_edge`, when non-empty, maps each
/// internal non-root node to the cap of the bond above it and overrides the
/// uniform target.
struct TruncationPlan {
    Index chi_target = 1;
    std::vector<Index> chi_per_edge;  // indexed by node, entry 0 ignored
    double cutoff = 0.0;              // relative singular-value floor

    void validate(const TtnModel& model) const;
};

struct EdgeRecord {
    Index node = -1;  // edge sits above this node
    Index chi_before = 0;
    Index chi_after = 0;
    double truncation_error = 0.0;  // relative RSS of discarded singular values
};

struct LatencyStats {
    double mean_us = -1.0;
    double p50_us = -1.0;
    double p99_us = -1.0;
};

struct CompressionReport {
    std::vector<EdgeRecord> edges;
    Eigen::VectorXd fidelity;      // per label, |<psi'|psi>| / (|psi'||psi|)
    double total_fidelity = 1.0;   // same ratio for the stacked label state
    Index params_before = 0;
    Index params_after = 0;
    LatencyStats latency_before;   // filled by tune_for_latency
    LatencyStats latency_after;
};

/// One root-to-leaves SVD pass over the internal edges, each cut with the
/// canonical center adjacent. Never retrains and never touches leaf legs.
std::pair<TtnModel, CompressionReport> truncate(const TtnModel& model,
                                                const TruncationPlan& plan);

/// Total entries over node tensors.
Index param_count(const TtnModel& model);

/// Mean/p99 single-threaded prediction latency, cycling the calibration set
/// until at least `min_predictions` classifications ran (warm start).
LatencyStats measure_latency(const TtnModel& model,
                             const std::vector<EncodedSample>& calibration,
                             Index min_predictions = 10000);

/// Binary-search the largest uniform chi whose measured latency meets the
/// budget. Throws LatencyFloorError when even chi = 1 is too slow.
std::pair<TtnModel, CompressionReport> tune_for_latency(
    const TtnModel& model, double budget_us,
    const std::vector<EncodedSample>& calibration);

void write_compression_report(const CompressionReport& r, const std::string& path);

}  // namespace ttnc

#endif  // TTNC_COMPRESSION_HPP
