#ifndef TTNC_DATA_HPP
#define TTNC_DATA_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttnc/errors.hpp"
#include "ttnc/model.hpp"

namespace ttnc {

constexpr int kLabelB = 0;
constexpr int kLabelBbar = 1;

/// Tabular dataset: one row per jet, columns in schema order.
struct Dataset {
    std::vector<std::string> names;
    Eigen::MatrixXd features;  // n x F
    std::vector<int> labels;   // kLabelB / kLabelBbar
    FeatureSpec spec;          // may be empty until fitted on a training split

    Index n() const { return features.rows(); }
    Index n_features() const { return features.cols(); }
    std::vector<double> row(Index i) const {
        std::vector<double> out(static_cast<std::size_t>(n_features()));
        for (Index j = 0; j < n_features(); ++j) out[static_cast<std::size_t>(j)] = features(i, j);
        return out;
    }
};

/// 16-feature jet schema: (q, pt_rel, dr) per particle type, then jet charge.
const std::vector<std::string>& jet_feature_names();
constexpr Index kJetFeatureCount = 16;
constexpr std::array<const char*, 5> kParticleTypes = {"mu", "k", "pi", "e", "p"};

/// Column kinds for the jet schema (charge columns use the shift encoding).
std::vector<FeatureKind> jet_feature_kinds();

/// pt_rel-weighted average of particle charges. All-zero weights give Q = 0
/// with *flagged set (when provided).
double jet_charge(const std::vector<std::pair<double, double>>& particles,
                  bool* degenerate = nullptr);

/// eta = -ln tan(theta/2), theta in (0, pi).
double pseudorapidity(double theta);
double delta_r(double deta, double dphi);

Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

/// x_max per feature from this (training) partition; charge columns keep the
/// fixed shift encoding.
FeatureSpec fit_feature_spec(const Dataset& train);

struct SplitSpec {
    double train_fraction = 0.60;
    double val_fraction = 0.10;  // fraction of the training slice
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train, validation, test;
};

/// Deterministic stratified split; spec on train is fitted and copied to all.
SplitResult split(const Dataset& ds, const SplitSpec& s);

/// Per-particle generation plan; signal strengths in [0, 1], 0 = pure noise.
/// A charge signal s > 0 makes P(q matches the label convention) = 0.5 + s/2;
/// s = 0 draws the charge uniformly from {-1, 0, +1}.
struct ParticlePlan {
    double presence = 1.0;
    double q_signal = 0.0;
    double pt_signal = 0.0;
    double dr_signal = 0.0;
};

struct SynthConfig {
    Index n_events = 10000;
    std::uint64_t seed = 0;
    std::array<ParticlePlan, 5> particles{};
    bool derive_jet_charge = true;  // Q from generated particles; otherwise q_signal below
    double jet_charge_signal = 0.0;
    bool require_signal = false;  // reject an all-noise plan
};

/// Labeled synthetic jets; the plan doubles as the feature-importance oracle.
Dataset synth_generate(const SynthConfig& cfg);

/// Generator ground truth: planned signal strength per schema column.
std::vector<double> planned_signal(const SynthConfig& cfg);

/// Column-restricted copy (QuIPS output consumes this).
Dataset restrict_columns(const Dataset& ds, const std::vector<Index>& keep);

}  // namespace ttnc

#endif  // TTNC_DATA_HPP
