#include "ttnc/compression.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace ttnc {

void TruncationPlan::validate(const TtnModel& model) const {
    if (cutoff < 0.0 || cutoff >= 1.0)
        throw ConfigError("TruncationPlan: cutoff must be in [0, 1)");
    if (chi_per_edge.empty()) {
        if (chi_target < 1) throw ConfigError("TruncationPlan: chi_target must be >= 1");
        return;
    }
    if (static_cast<Index>(chi_per_edge.size()) != model.topology().n_internal())
        throw ConfigError("TruncationPlan: chi_per_edge must list every internal node");
    for (Index node = 1; node < model.topology().n_internal(); ++node)
        if (chi_per_edge[static_cast<std::size_t>(node)] < 1)
            throw ConfigError("TruncationPlan: per-edge chi must be >= 1");
}

namespace {

// Cut the bond between the center node and one internal child. The kept part
// U*S stays in the center tensor, V is absorbed into the child, which remains
// an isometry toward its parent.
EdgeRecord cut_edge(TtnModel& m, Index node, bool right, Index chi, double cutoff) {
    const Index child = right ? m.topology().right_slot(node) : m.topology().left_slot(node);
    TensorD& t = m.tensor(node);
    EdgeRecord rec;
    rec.node = child;
    rec.chi_before = t.dim(right ? 1 : 0);

    auto sv = right ? svd_split(t, {0, 2}, chi, cutoff) : svd_split(t, {1, 2}, chi, cutoff);
    const Index k = sv.singular_values.size();
    rec.chi_after = k;
    const double total = std::sqrt(sv.singular_values.squaredNorm() +
                                   sv.truncation_error * sv.truncation_error);
    rec.truncation_error = total > 0.0 ? sv.truncation_error / total : 0.0;

    TensorD& us = sv.left_isometry;  // (other, parent, k)
    Eigen::Map<MatrixX<double>> um(us.data(), us.numel() / k, k);
    um *= sv.singular_values.asDiagonal();
    const std::vector<Index> order =
        right ? std::vector<Index>{0, 2, 1} : std::vector<Index>{2, 0, 1};
    t = permuted(us, std::span<const Index>(order));

    // child parent leg contracted with V's old-bond leg
    m.tensor(child) = contract(m.tensor(child), sv.right_isometry, {{2, 1}});
    return rec;
}

void sweep(TtnModel& m, const TruncationPlan& plan, std::vector<EdgeRecord>& edges,
           Index node) {
    const TreeTopology& topo = m.topology();
    for (bool right : {false, true}) {
        const Index slot = right ? topo.right_slot(node) : topo.left_slot(node);
        if (!topo.is_internal_slot(slot)) continue;
        const Index chi = plan.chi_per_edge.empty()
                              ? plan.chi_target
                              : plan.chi_per_edge[static_cast<std::size_t>(slot)];
        edges.push_back(cut_edge(m, node, right, chi, plan.cutoff));
    }
    for (bool right : {false, true}) {
        const Index slot = right ? topo.right_slot(node) : topo.left_slot(node);
        if (!topo.is_internal_slot(slot)) continue;
        m.move_center_to_child(right);
        sweep(m, plan, edges, slot);
        m.move_center_to_parent();
    }
}

double fidelity_ratio(double overlap, double nsq_a, double nsq_b) {
    const double den = std::sqrt(nsq_a * nsq_b);
    return den > 0.0 ? std::min(std::abs(overlap) / den, 1.0) : 0.0;
}

}  // namespace

std::pair<TtnModel, CompressionReport> truncate(const TtnModel& model,
                                                const TruncationPlan& plan) {
    plan.validate(model);
    model.validate();

    TtnModel out = canonicalize(model, 0);
    CompressionReport rep;
    rep.params_before = param_count(model);
    sweep(out, plan, rep.edges, 0);
    out.validate();
    rep.params_after = param_count(out);

    const Eigen::VectorXd ov = label_overlaps(out, model);
    const Eigen::VectorXd na = label_norms_sq(out);
    const Eigen::VectorXd nb = label_norms_sq(model);
    rep.fidelity.resize(model.n_classes());
    for (Index l = 0; l < model.n_classes(); ++l)
        rep.fidelity(l) = fidelity_ratio(ov(l), na(l), nb(l));
    rep.total_fidelity = fidelity_ratio(ov.sum(), na.sum(), nb.sum());
    return {std::move(out), std::move(rep)};
}

Index param_count(const TtnModel& model) {
    Index n = 0;
    for (const TensorD& t : model.tensors()) n += t.numel();
    return n;
}

LatencyStats measure_latency(const TtnModel& model,
                             const std::vector<EncodedSample>& calibration,
                             Index min_predictions) {
    if (calibration.empty()) throw ConfigError("measure_latency: empty calibration set");
    if (min_predictions < 1) throw ConfigError("measure_latency: need min_predictions >= 1");

    using clock = std::chrono::steady_clock;
    double sink = 0.0;
    for (const EncodedSample& s : calibration) sink += overlaps(model, s).sum();  // warm-up

    std::vector<double> us;
    us.reserve(static_cast<std::size_t>(min_predictions));
    std::size_t i = 0;
    while (static_cast<Index>(us.size()) < min_predictions) {
        const auto t0 = clock::now();
        sink += overlaps(model, calibration[i]).sum();
        const auto t1 = clock::now();
        us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        if (++i == calibration.size()) i = 0;
    }
    if (!std::isfinite(sink)) throw NumericError("measure_latency: non-finite overlaps");

    LatencyStats stats;
    stats.mean_us = Eigen::Map<const Eigen::VectorXd>(us.data(),
                                                      static_cast<Index>(us.size()))
                        .mean();
    std::vector<double> sorted = us;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const auto k = static_cast<std::size_t>(
            std::ceil(q * static_cast<double>(sorted.size())) - 1.0);
        return sorted[std::min(k, sorted.size() - 1)];
    };
    stats.p50_us = quantile(0.50);
    stats.p99_us = quantile(0.99);
    return stats;
}

std::pair<TtnModel, CompressionReport> tune_for_latency(
    const TtnModel& model, double budget_us,
    const std::vector<EncodedSample>& calibration) {
    if (budget_us <= 0.0) throw ConfigError("tune_for_latency: budget must be > 0");

    const LatencyStats before = measure_latency(model, calibration);
    if (before.mean_us <= budget_us) {
        CompressionReport rep;
        rep.fidelity = Eigen::VectorXd::Ones(model.n_classes());
        rep.params_before = rep.params_after = param_count(model);
        rep.latency_before = rep.latency_after = before;
        return {model, std::move(rep)};
    }

    Index chi_max = 1;
    for (Index node = 1; node < model.topology().n_internal(); ++node)
        chi_max = std::max(chi_max, model.bond_dim(node));

    TruncationPlan plan;
    plan.chi_target = 1;
    auto best = truncate(model, plan);
    LatencyStats best_lat = measure_latency(best.first, calibration);
    if (best_lat.mean_us > budget_us)
        throw LatencyFloorError("tune_for_latency: budget " + std::to_string(budget_us) +
                                    " us is below the chi=1 floor of " +
                                    std::to_string(best_lat.mean_us) + " us",
                                best_lat.mean_us);

    Index lo = 2, hi = chi_max - 1;
    while (lo <= hi) {
        const Index mid = lo + (hi - lo) / 2;
        plan.chi_target = mid;
        auto cand = truncate(model, plan);
        const LatencyStats lat = measure_latency(cand.first, calibration);
        if (lat.mean_us <= budget_us) {
            best = std::move(cand);
            best_lat = lat;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }

    best.second.latency_before = before;
    best.second.latency_after = best_lat;
    return best;
}

void write_compression_report(const CompressionReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_compression_report: cannot open " + path);
    out << std::setprecision(8);
    out << "# edge chi_before chi_after rel_truncation_error\n";
    for (const EdgeRecord& e : r.edges)
        out << e.node << ' ' << e.chi_before << ' ' << e.chi_after << ' '
            << e.truncation_error << '\n';
    out << "# fidelity per label\n";
    for (Index l = 0; l < r.fidelity.size(); ++l)
        out << l << ' ' << r.fidelity(l) << '\n';
    out << "# total_fidelity " << r.total_fidelity << '\n';
    out << "# free_parameters " << r.params_before << " -> " << r.params_after << '\n';
    if (r.latency_before.mean_us >= 0.0)
        out << "# latency_us mean " << r.latency_before.mean_us << " -> "
            << r.latency_after.mean_us << " p99 " << r.latency_before.p99_us << " -> "
            << r.latency_after.p99_us << '\n';
}

}  // namespace ttnc
