#ifndef TTNC_EVALUATION_HPP
#define TTNC_EVALUATION_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttnc/data.hpp"
#include "ttnc/model.hpp"

namespace ttnc {

/// Tagging summary at a fixed abstention band. `accuracy_defined` is false
/// when no event was decided; `accuracy` then holds the neutral value 0.5.
struct EvalReport {
    Index n_total = 0;
    Index n_decided = 0;
    Index n_correct = 0;
    double eps_eff = 0.0;        // decided fraction
    double accuracy = 0.5;       // among decided
    double tagging_power = 0.0;  // eps_eff * (2a - 1)^2
    double eps_eff_err = 0.0;
    double accuracy_err = 0.0;
    double tagging_power_err = 0.0;
    bool accuracy_defined = false;
};

struct ThresholdChoice {
    double delta = 0.0;
    double confidence_cut = 0.5;  // 0.5 + delta / 2
    double tagging_power = 0.0;   // achieved on the optimization set
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) .. (1,1), tie groups collapsed
    double auc = 0.0;
};

struct ConfidenceHistogram {
    static constexpr Index kBins = 50;
    Eigen::MatrixXd by_truth;  // 2 x kBins, row = truth label
    Eigen::MatrixXd by_muon;   // 2 x kBins, row 0 = no muon, row 1 = muon
};

/// Confidence for the b hypothesis per row, encoded with the model's spec.
Eigen::VectorXd predict_confidences(const TtnModel& model, const Dataset& ds);

/// Decide b when c >= 0.5 + delta/2, bbar when c <= 0.5 - delta/2.
int decide_confidence(double confidence, double delta);

EvalReport tagging_power(const Eigen::VectorXd& confidences,
                         const std::vector<int>& truths, double delta);

/// Grid search over delta in {0.00, 0.01, ..., 0.98}; ties favor smaller delta.
/// Must never see test data.
ThresholdChoice optimize_threshold(const Eigen::VectorXd& confidences,
                                   const std::vector<int>& truths);

RocCurve roc_auc(const Eigen::VectorXd& confidences, const std::vector<int>& truths);

/// Sign of the muon charge column: -1 tags b, +1 tags bbar (flip with
/// negative_is_b = false); a zeroed muon abstains.
std::vector<int> muon_tag(const Dataset& ds, bool negative_is_b = true);

/// True where the muon triplet is not all-zero.
std::vector<bool> muon_present(const Dataset& ds);

ConfidenceHistogram confidence_histogram(const Eigen::VectorXd& confidences,
                                         const std::vector<int>& truths,
                                         const std::vector<bool>& has_muon);

/// Per-bin reports over a covariate column; edges must be strictly increasing.
std::vector<EvalReport> binned_tagging_power(const Eigen::VectorXd& confidences,
                                             const std::vector<int>& truths,
                                             const Eigen::VectorXd& covariate,
                                             const std::vector<double>& bin_edges,
                                             double delta);

void write_eval_report(const EvalReport& r, const std::string& path);
void write_roc(const RocCurve& c, const std::string& path);
void write_histogram(const ConfidenceHistogram& h, const std::string& path);

}  // namespace ttnc

#endif  // TTNC_EVALUATION_HPP
