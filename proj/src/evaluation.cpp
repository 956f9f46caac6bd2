#include "ttnc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace ttnc {

namespace {

void check_inputs(const Eigen::VectorXd& confidences, const std::vector<int>& truths) {
    if (confidences.size() == 0) throw DataError("evaluation: empty input");
    if (confidences.size() != static_cast<Index>(truths.size()))
        throw DataError("evaluation: confidences and truths differ in length");
    for (Index i = 0; i < confidences.size(); ++i) {
        const double c = confidences(i);
        if (!(c >= 0.0 && c <= 1.0))
            throw DataError("evaluation: confidence out of [0, 1] at row " +
                            std::to_string(i));
    }
    for (int t : truths)
        if (t != kLabelB && t != kLabelBbar)
            throw DataError("evaluation: truth labels must be b or bbar");
}

void check_two_classes(const std::vector<int>& truths) {
    const bool has_b = std::find(truths.begin(), truths.end(), kLabelB) != truths.end();
    const bool has_bbar =
        std::find(truths.begin(), truths.end(), kLabelBbar) != truths.end();
    if (!has_b || !has_bbar)
        throw DataError("evaluation: both classes must be present");
}

void require_muon_schema(const Dataset& ds) {
    if (ds.n_features() < 3 || ds.names.size() < 3 || ds.names[0] != "mu_q" ||
        ds.names[1] != "mu_pt" || ds.names[2] != "mu_dr")
        throw DataError("evaluation: dataset does not start with the muon triplet");
}

}  // namespace

Eigen::VectorXd predict_confidences(const TtnModel& model, const Dataset& ds) {
    if (model.n_classes() != 2)
        throw ConfigError("predict_confidences: needs a two-class model");
    if (ds.n_features() != static_cast<Index>(model.feature_spec().size()))
        throw DataError("predict_confidences: feature count mismatch");
    Eigen::VectorXd out(ds.n());
    for (Index i = 0; i < ds.n(); ++i) {
        EncodedSample s = encode(ds.row(i), model.feature_spec());
        out(i) = classify(model, s, 0.0).confidences(kLabelB);
    }
    return out;
}

int decide_confidence(double confidence, double delta) {
    if (delta < 0.0 || delta >= 1.0)
        throw ConfigError("decide_confidence: delta must be in [0, 1)");
    if (confidence >= 0.5 + delta / 2.0) return kLabelB;
    if (confidence <= 0.5 - delta / 2.0) return kLabelBbar;
    return kAbstain;
}

EvalReport tagging_power(const Eigen::VectorXd& confidences,
                         const std::vector<int>& truths, double delta) {
    check_inputs(confidences, truths);
    EvalReport r;
    r.n_total = confidences.size();
    for (Index i = 0; i < confidences.size(); ++i) {
        const int d = decide_confidence(confidences(i), delta);
        if (d == kAbstain) continue;
        ++r.n_decided;
        if (d == truths[static_cast<std::size_t>(i)]) ++r.n_correct;
    }
    const double n = static_cast<double>(r.n_total);
    r.eps_eff = static_cast<double>(r.n_decided) / n;
    r.eps_eff_err = std::sqrt(r.eps_eff * (1.0 - r.eps_eff) / n);
    if (r.n_decided == 0) return r;  // tagging power 0, accuracy undefined

    r.accuracy_defined = true;
    const double nd = static_cast<double>(r.n_decided);
    r.accuracy = static_cast<double>(r.n_correct) / nd;
    r.accuracy_err = std::sqrt(r.accuracy * (1.0 - r.accuracy) / nd);
    const double dil = 2.0 * r.accuracy - 1.0;
    r.tagging_power = r.eps_eff * dil * dil;
    r.tagging_power_err =
        std::sqrt(std::pow(dil * dil * r.eps_eff_err, 2) +
                  std::pow(4.0 * r.eps_eff * dil * r.accuracy_err, 2));
    return r;
}

ThresholdChoice optimize_threshold(const Eigen::VectorXd& confidences,
                                   const std::vector<int>& truths) {
    check_inputs(confidences, truths);
    check_two_classes(truths);
    ThresholdChoice best;
    best.tagging_power = -1.0;
    for (int i = 0; i <= 98; ++i) {
        const double delta = static_cast<double>(i) / 100.0;
        const EvalReport r = tagging_power(confidences, truths, delta);
        if (r.tagging_power > best.tagging_power) {
            best.delta = delta;
            best.confidence_cut = 0.5 + delta / 2.0;
            best.tagging_power = r.tagging_power;
        }
    }
    return best;
}

RocCurve roc_auc(const Eigen::VectorXd& confidences, const std::vector<int>& truths) {
    check_inputs(confidences, truths);
    check_two_classes(truths);

    std::vector<Index> order(static_cast<std::size_t>(confidences.size()));
    std::iota(order.begin(), order.end(), Index(0));
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return confidences(a) > confidences(b); });

    double pos = 0, neg = 0;
    for (int t : truths) (t == kLabelB ? pos : neg) += 1.0;

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, 1.0});
    double tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double score = confidences(order[i]);
        while (i < order.size() && confidences(order[i]) == score) {
            if (truths[static_cast<std::size_t>(order[i])] == kLabelB)
                tp += 1.0;
            else
                fp += 1.0;
            ++i;
        }
        curve.points.push_back({fp / neg, tp / pos, score});
    }
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const RocPoint& a = curve.points[k - 1];
        const RocPoint& b = curve.points[k];
        curve.auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    }
    return curve;
}

std::vector<bool> muon_present(const Dataset& ds) {
    require_muon_schema(ds);
    std::vector<bool> out(static_cast<std::size_t>(ds.n()));
    for (Index i = 0; i < ds.n(); ++i)
        out[static_cast<std::size_t>(i)] =
            ds.features(i, 0) != 0.0 || ds.features(i, 1) != 0.0 || ds.features(i, 2) != 0.0;
    return out;
}

std::vector<int> muon_tag(const Dataset& ds, bool negative_is_b) {
    require_muon_schema(ds);
    std::vector<int> out(static_cast<std::size_t>(ds.n()), kAbstain);
    for (Index i = 0; i < ds.n(); ++i) {
        const double q = ds.features(i, 0);
        if (q == 0.0) continue;  // no muon, or an unsigned charge: abstain
        const bool neg = q < 0.0;
        out[static_cast<std::size_t>(i)] =
            (neg == negative_is_b) ? kLabelB : kLabelBbar;
    }
    return out;
}

ConfidenceHistogram confidence_histogram(const Eigen::VectorXd& confidences,
                                         const std::vector<int>& truths,
                                         const std::vector<bool>& has_muon) {
    check_inputs(confidences, truths);
    if (has_muon.size() != truths.size())
        throw DataError("confidence_histogram: muon flags length mismatch");
    ConfidenceHistogram h;
    h.by_truth = Eigen::MatrixXd::Zero(2, ConfidenceHistogram::kBins);
    h.by_muon = Eigen::MatrixXd::Zero(2, ConfidenceHistogram::kBins);
    for (Index i = 0; i < confidences.size(); ++i) {
        const auto bin = std::min<Index>(
            static_cast<Index>(confidences(i) * ConfidenceHistogram::kBins),
            ConfidenceHistogram::kBins - 1);
        h.by_truth(truths[static_cast<std::size_t>(i)], bin) += 1.0;
        h.by_muon(has_muon[static_cast<std::size_t>(i)] ? 1 : 0, bin) += 1.0;
    }
    return h;
}

std::vector<EvalReport> binned_tagging_power(const Eigen::VectorXd& confidences,
                                             const std::vector<int>& truths,
                                             const Eigen::VectorXd& covariate,
                                             const std::vector<double>& bin_edges,
                                             double delta) {
    check_inputs(confidences, truths);
    if (covariate.size() != confidences.size())
        throw DataError("binned_tagging_power: covariate length mismatch");
    if (bin_edges.size() < 2)
        throw DataError("binned_tagging_power: need at least two bin edges");
    for (std::size_t k = 1; k < bin_edges.size(); ++k)
        if (bin_edges[k] <= bin_edges[k - 1])
            throw DataError("binned_tagging_power: edges must be strictly increasing");

    std::vector<EvalReport> out;
    for (std::size_t k = 0; k + 1 < bin_edges.size(); ++k) {
        const bool last = k + 2 == bin_edges.size();
        std::vector<double> conf;
        std::vector<int> tr;
        for (Index i = 0; i < covariate.size(); ++i) {
            const double x = covariate(i);
            const bool in = x >= bin_edges[k] &&
                            (last ? x <= bin_edges[k + 1] : x < bin_edges[k + 1]);
            if (!in) continue;
            conf.push_back(confidences(i));
            tr.push_back(truths[static_cast<std::size_t>(i)]);
        }
        if (conf.empty()) {
            out.emplace_back();
            continue;
        }
        Eigen::Map<const Eigen::VectorXd> cv(conf.data(), static_cast<Index>(conf.size()));
        out.push_back(tagging_power(cv, tr, delta));
    }
    return out;
}

void write_eval_report(const EvalReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_eval_report: cannot open " + path);
    out << std::setprecision(8);
    out << "n_total " << r.n_total << '\n';
    out << "n_decided " << r.n_decided << '\n';
    out << "eps_eff " << r.eps_eff << " +- " << r.eps_eff_err << '\n';
    out << "accuracy " << r.accuracy << " +- " << r.accuracy_err
        << (r.accuracy_defined ? "" : " (undefined: no decided events)") << '\n';
    out << "tagging_power " << r.tagging_power << " +- " << r.tagging_power_err << '\n';
}

void write_roc(const RocCurve& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_roc: cannot open " + path);
    out << std::setprecision(8);
    out << "# fpr tpr threshold (auc " << c.auc << ")\n";
    for (const RocPoint& p : c.points)
        out << p.fpr << ' ' << p.tpr << ' ' << p.threshold << '\n';
}

void write_histogram(const ConfidenceHistogram& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_histogram: cannot open " + path);
    out << "# bin_low truth_b truth_bbar no_muon muon\n";
    const double w = 1.0 / ConfidenceHistogram::kBins;
    out << std::setprecision(8);
    for (Index b = 0; b < ConfidenceHistogram::kBins; ++b)
        out << b * w << ' ' << h.by_truth(kLabelB, b) << ' ' << h.by_truth(kLabelBbar, b)
            << ' ' << h.by_muon(0, b) << ' ' << h.by_muon(1, b) << '\n';
}

}  // namespace ttnc
