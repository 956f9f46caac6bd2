#include "ttnc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ttnc {

namespace {

double schmidt_entropy(const Eigen::VectorXd& sv) {
    const double total = sv.squaredNorm();
    if (!(total > 0)) throw NumericError("entropy: zero-norm state");
    double s = 0;
    for (Index i = 0; i < sv.size(); ++i) {
        const double p = sv(i) * sv(i) / total;
        if (p > 0) s -= p * std::log(p);
    }
    return std::max(s, 0.0);
}

Eigen::VectorXd singular_values_of(const TensorD& t, std::initializer_list<Index> rows) {
    std::vector<Index> left(rows);
    auto m = detail::matricize(t, std::span<const Index>(left));
    Eigen::Map<const MatrixX<double>> mat(m.permuted.data(), m.rows, m.cols);
    return Eigen::JacobiSVD<Eigen::MatrixXd>(mat).singularValues();
}

void check_label(const TtnModel& model, Index label) {
    if (label < 0 || label >= model.n_classes())
        throw NumericError("analysis: label out of range");
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Double-layer transfer matrix of the subtree below `slot`:
/// E[p, p'] = sum T[a,b,p] El[a,a'] Er[b,b'] T[a',b',p'].
/// `flip` lists leaves carrying a sigma_z insertion.
Eigen::MatrixXd transfer(const TtnModel& model, Index slot,
                         const std::vector<Index>& flip) {
    const TreeTopology& topo = model.topology();
    if (!topo.is_internal_slot(slot)) {
        const Index leaf = topo.leaf_of_slot(slot);
        const Index d = model.leaf_dim(leaf);
        Eigen::MatrixXd e = Eigen::MatrixXd::Identity(d, d);
        if (std::find(flip.begin(), flip.end(), leaf) != flip.end()) {
            if (d != 2) throw NumericError("correlation: operator on a padded leaf");
            e(1, 1) = -1;
        }
        return e;
    }
    const Eigen::MatrixXd el = transfer(model, topo.left_slot(slot), flip);
    const Eigen::MatrixXd er = transfer(model, topo.right_slot(slot), flip);
    const TensorD& t = model.tensor(slot);
    Eigen::Map<const MatrixX<double>> a(t.data(), t.dim(0) * t.dim(1), t.dim(2));
    return a.transpose() * kron(el, er) * a;
}

/// Transfer value at the root, sliced to one label on both layers.
double root_expectation(const TtnModel& model, Index label,
                        const std::vector<Index>& flip) {
    const TreeTopology& topo = model.topology();
    const Eigen::MatrixXd el = transfer(model, topo.left_slot(0), flip);
    const Eigen::MatrixXd er = transfer(model, topo.right_slot(0), flip);
    const TensorD& t = model.tensor(0);
    Eigen::Map<const MatrixX<double>> a(t.data(), t.dim(0) * t.dim(1), t.dim(2));
    const Eigen::VectorXd v = a.col(label);
    return v.dot(kron(el, er) * v);
}

}  // namespace

Eigen::VectorXd feature_entropy(const TtnModel& model, Index feature) {
    const TreeTopology& topo = model.topology();
    if (feature < 0 || feature >= topo.n_features())
        throw NumericError("feature_entropy: feature out of range");
    const Index leaf_slot = topo.slot_of_leaf(topo.feature_leaf(feature));
    const Index parent = topo.parent(leaf_slot);
    const bool is_left = (topo.left_slot(parent) == leaf_slot);

    Eigen::VectorXd out(model.n_classes());
    for (Index l = 0; l < model.n_classes(); ++l) {
        TtnModel m = canonicalize(slice_label(model, l), parent);
        const Eigen::VectorXd sv =
            singular_values_of(m.tensor(parent), {is_left ? Index(0) : Index(1)});
        out(l) = schmidt_entropy(sv);
    }
    return out;
}

EntropyReport feature_entropy(const TtnModel& model) {
    const Index nf = model.topology().n_features();
    EntropyReport rep;
    rep.per_label.resize(model.n_classes(), nf);
    for (Index f = 0; f < nf; ++f) rep.per_label.col(f) = feature_entropy(model, f);
    rep.aggregated = rep.per_label.colwise().mean();
    return rep;
}

Eigen::VectorXd edge_entropy(const TtnModel& model, Index node) {
    if (node <= 0 || node >= model.topology().n_internal())
        throw NumericError("edge_entropy: need an internal non-root node");
    Eigen::VectorXd out(model.n_classes());
    for (Index l = 0; l < model.n_classes(); ++l) {
        TtnModel m = canonicalize(slice_label(model, l), node);
        out(l) = schmidt_entropy(singular_values_of(m.tensor(node), {0, 1}));
    }
    return out;
}

Eigen::MatrixXd correlation(const TtnModel& model, Index label) {
    check_label(model, label);
    const TreeTopology& topo = model.topology();
    const Index nf = topo.n_features();
    const double norm = root_expectation(model, label, {});
    if (!(norm > 0)) throw NumericError("correlation: zero-norm label state");

    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(nf, nf);
    for (Index i = 0; i < nf; ++i) {
        for (Index j = i + 1; j < nf; ++j) {
            const double v = root_expectation(
                model, label, {topo.feature_leaf(i), topo.feature_leaf(j)});
            c(i, j) = c(j, i) = v / norm;
        }
    }
    return c;
}

QuipsRanking quips(const TtnModel& model, Index k, double redundancy_threshold) {
    const Index nf = model.topology().n_features();
    if (k < 1 || k > nf) throw ConfigError("quips: k must lie in [1, n_features]");
    if (!(redundancy_threshold > 0))
        throw ConfigError("quips: redundancy threshold must be positive");

    QuipsRanking r;
    r.entropy = feature_entropy(model);
    for (Index l = 0; l < model.n_classes(); ++l)
        r.correlations.push_back(correlation(model, l));

    r.ranking.resize(static_cast<std::size_t>(nf));
    std::iota(r.ranking.begin(), r.ranking.end(), Index(0));
    std::stable_sort(r.ranking.begin(), r.ranking.end(), [&](Index a, Index b) {
        return r.entropy.aggregated(a) > r.entropy.aggregated(b);
    });

    r.redundant.assign(static_cast<std::size_t>(nf), false);
    for (Index i = 0; i < nf; ++i) {
        for (Index j = i + 1; j < nf; ++j) {
            double min_abs = 1.0;
            for (const auto& c : r.correlations)
                min_abs = std::min(min_abs, std::abs(c(i, j)));
            if (min_abs > redundancy_threshold) {
                const bool drop_i =
                    r.entropy.aggregated(i) < r.entropy.aggregated(j) ||
                    (r.entropy.aggregated(i) == r.entropy.aggregated(j) && i > j);
                r.redundant[static_cast<std::size_t>(drop_i ? i : j)] = true;
            }
        }
    }

    // top-k non-redundant; redundant features backfill only when the
    // non-redundant pool runs short of k
    for (int pass = 0; pass < 2 && static_cast<Index>(r.selected.size()) < k; ++pass)
        for (Index f : r.ranking) {
            if (static_cast<Index>(r.selected.size()) == k) break;
            if (r.redundant[static_cast<std::size_t>(f)] != (pass == 1)) continue;
            r.selected.push_back(f);
        }
    std::sort(r.selected.begin(), r.selected.end());
    for (Index f = 0; f < nf; ++f)
        if (!std::binary_search(r.selected.begin(), r.selected.end(), f))
            r.discarded.push_back(f);
    return r;
}

Dataset restrict_dataset(const Dataset& ds, const QuipsRanking& ranking) {
    if (static_cast<Index>(ranking.redundant.size()) != ds.n_features())
        throw DataError("restrict_dataset: ranking does not match the dataset schema");
    return restrict_columns(ds, ranking.selected);
}

void write_feature_report(const QuipsRanking& r, const std::vector<std::string>& names,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_feature_report: cannot open " + path);
    const Index nf = r.entropy.aggregated.size();
    if (static_cast<Index>(names.size()) != nf)
        throw DataError("write_feature_report: names do not match the report");

    out << "# feature entropies (nats), ranked\n";
    out << "# rank feature name aggregate";
    for (Index l = 0; l < r.entropy.per_label.rows(); ++l) out << " S_label" << l;
    out << " redundant selected\n";
    char buf[64];
    for (std::size_t pos = 0; pos < r.ranking.size(); ++pos) {
        const Index f = r.ranking[pos];
        out << pos << ' ' << f << ' ' << names[static_cast<std::size_t>(f)];
        std::snprintf(buf, sizeof buf, " %.6f", r.entropy.aggregated(f));
        out << buf;
        for (Index l = 0; l < r.entropy.per_label.rows(); ++l) {
            std::snprintf(buf, sizeof buf, " %.6f", r.entropy.per_label(l, f));
            out << buf;
        }
        out << ' ' << (r.redundant[static_cast<std::size_t>(f)] ? 1 : 0) << ' '
            << (std::binary_search(r.selected.begin(), r.selected.end(), f) ? 1 : 0)
            << '\n';
    }
    for (std::size_t l = 0; l < r.correlations.size(); ++l) {
        out << "# correlation matrix, label " << l << '\n';
        const auto& c = r.correlations[l];
        for (Index i = 0; i < c.rows(); ++i) {
            for (Index j = 0; j < c.cols(); ++j) {
                std::snprintf(buf, sizeof buf, j ? " %.6f" : "%.6f", c(i, j));
                out << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace ttnc
