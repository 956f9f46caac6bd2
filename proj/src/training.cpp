#include "ttnc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

namespace ttnc {

namespace {

constexpr double kDegeneratePenalty = 700.0;  // ~ -ln(double min)

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Rows {
    Index begin = 0;
    Index count = 0;
};

/// Per-sample contraction environments for every tree edge, vectorized over
/// the batch: rows are samples. down_[k] holds the subtree contraction below
/// the parent leg of node k (valid while k lies off the current center path);
/// up_[k] holds the environment above node k's parent leg, one column per
/// (parent index, label) pair, valid for nodes on the root-to-center path.
class EnvCache {
  public:
    EnvCache(const TtnModel& model, const LabeledBatch& batch)
        : labels_(batch.labels), nl_(model.n_classes()) {
        const TreeTopology& topo = model.topology();
        n_ = static_cast<Index>(batch.samples.size());
        leaf_.resize(static_cast<std::size_t>(topo.n_leaves()));
        for (Index leaf = 0; leaf < topo.n_leaves(); ++leaf) {
            const Index d = model.leaf_dim(leaf);
            MatrixXd m(n_, d);
            for (Index s = 0; s < n_; ++s) {
                Eigen::Vector2d v =
                    leaf_state(model, batch.samples[static_cast<std::size_t>(s)], leaf);
                m.row(s) = v.head(d).transpose();
            }
            leaf_[static_cast<std::size_t>(leaf)] = std::move(m);
        }
        down_.resize(static_cast<std::size_t>(topo.n_internal()));
        up_.resize(static_cast<std::size_t>(topo.n_internal()));

        const Index center = model.canonical_center();
        if (center < 0) throw NumericError("EnvCache: model has no canonical center");
        std::vector<bool> on_path(static_cast<std::size_t>(topo.n_internal()), false);
        std::vector<Index> path;
        for (Index v = center;; v = topo.parent(v)) {
            on_path[static_cast<std::size_t>(v)] = true;
            path.push_back(v);
            if (v == 0) break;
        }
        std::reverse(path.begin(), path.end());  // root .. center

        for (Index k = topo.n_internal() - 1; k >= 1; --k)
            if (!on_path[static_cast<std::size_t>(k)]) refresh_down(model, k);

        // root's virtual upward environment: identity over (label, label)
        MatrixXd delta = MatrixXd::Zero(n_, nl_ * nl_);
        for (Index l = 0; l < nl_; ++l) delta.col(l * nl_ + l).setOnes();
        up_[0] = std::move(delta);
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            refresh_up(model, path[i + 1]);
    }

    Index n_samples() const { return n_; }
    const std::vector<int>& labels() const { return labels_; }

    void move_to_parent(TtnModel& model) {
        const Index old = model.canonical_center();
        model.move_center_to_parent();
        refresh_down(model, old);
    }

    void move_to_child(TtnModel& model, bool right) {
        model.move_center_to_child(right);
        refresh_up(model, model.canonical_center());
    }

    /// Signed overlaps f[s, l] at the current center, restricted to rows.
    MatrixXd overlaps_at_center(const TtnModel& model, Rows r) const {
        const Index c = model.canonical_center();
        const MatrixXd m = local_vector(model, c, r);
        const auto& u = up_[static_cast<std::size_t>(c)];
        const Index dc = model.tensor(c).dim(2);
        MatrixXd f = MatrixXd::Zero(r.count, nl_);
        for (Index l = 0; l < nl_; ++l)
            for (Index k = 0; k < dc; ++k)
                f.col(l).array() += m.col(k).array() *
                                    u.col(k * nl_ + l).middleRows(r.begin, r.count).array();
        return f;
    }

    /// Mean loss (and optionally d loss / d f, already divided by row count).
    double loss_from_overlaps(const MatrixXd& f, Rows r, LossKind kind,
                              MatrixXd* coef) const {
        const double inv_n = 1.0 / static_cast<double>(r.count);
        if (coef) coef->setZero(r.count, nl_);
        double total = 0;
        for (Index s = 0; s < r.count; ++s) {
            const int y = labels_[static_cast<std::size_t>(r.begin + s)];
            const double fs_sq = f.row(s).squaredNorm();
            if (!(fs_sq > 0) || !std::isfinite(fs_sq)) {
                total += kDegeneratePenalty;
                continue;
            }
            const double fy = f(s, y);
            if (kind == LossKind::nll) {
                const double p = std::max(fy * fy / fs_sq, 1e-290);
                total += -std::log(p);
                if (coef) {
                    const double inv_fy = fy / (fy * fy + 1e-290);
                    for (Index l = 0; l < nl_; ++l)
                        (*coef)(s, l) = inv_n * 2.0 * (f(s, l) / fs_sq -
                                                       (l == y ? inv_fy : 0.0));
                }
            } else {
                double edotp = 0, sq = 0;
                for (Index l = 0; l < nl_; ++l) {
                    const double p = f(s, l) * f(s, l) / fs_sq;
                    const double e = p - (l == y ? 1.0 : 0.0);
                    sq += e * e;
                    edotp += e * p;
                }
                total += sq;
                if (coef) {
                    for (Index l = 0; l < nl_; ++l) {
                        const double p = f(s, l) * f(s, l) / fs_sq;
                        const double e = p - (l == y ? 1.0 : 0.0);
                        (*coef)(s, l) = inv_n * 4.0 * f(s, l) / fs_sq * (e - edotp);
                    }
                }
            }
        }
        return total * inv_n;
    }

    double loss_at_center(const TtnModel& model, Rows r, LossKind kind) const {
        return loss_from_overlaps(overlaps_at_center(model, r), r, kind, nullptr);
    }

    TensorD gradient_at_center(const TtnModel& model, Rows r, LossKind kind,
                               double* loss_out) const {
        const Index c = model.canonical_center();
        const MatrixXd f = overlaps_at_center(model, r);
        MatrixXd coef;
        const double l0 = loss_from_overlaps(f, r, kind, &coef);
        if (loss_out) *loss_out = l0;

        const auto& u = up_[static_cast<std::size_t>(c)];
        const TensorD& t = model.tensor(c);
        const Index da = t.dim(0), db = t.dim(1), dc = t.dim(2);
        MatrixXd w = MatrixXd::Zero(r.count, dc);
        for (Index k = 0; k < dc; ++k)
            for (Index l = 0; l < nl_; ++l)
                w.col(k).array() += coef.col(l).array() *
                                    u.col(k * nl_ + l).middleRows(r.begin, r.count).array();

        const auto& lmat = slot_rows(model, model.topology().left_slot(c), r);
        const auto& rmat = slot_rows(model, model.topology().right_slot(c), r);
        TensorD g({da, db, dc});
        for (Index a = 0; a < da; ++a) {
            MatrixXd rb = rmat.array().colwise() * lmat.col(a).array();
            Eigen::Map<MatrixX<double>> slab(g.data() + a * db * dc, db, dc);
            slab.noalias() = rb.transpose() * w;
        }
        return g;
    }

    /// Fraction of rows whose largest |f| matches the label.
    double accuracy_at_center(const TtnModel& model, Rows r) const {
        const MatrixXd f = overlaps_at_center(model, r);
        Index correct = 0;
        for (Index s = 0; s < r.count; ++s) {
            Index best;
            f.row(s).cwiseAbs().maxCoeff(&best);
            if (best == labels_[static_cast<std::size_t>(r.begin + s)]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(r.count);
    }

  private:
    // (matrix of the slot seen from its parent) restricted to rows
    MatrixXd slot_rows(const TtnModel& model, Index slot, Rows r) const {
        const TreeTopology& topo = model.topology();
        const MatrixXd& m = topo.is_internal_slot(slot)
                                ? down_[static_cast<std::size_t>(slot)]
                                : leaf_[static_cast<std::size_t>(topo.leaf_of_slot(slot))];
        return m.middleRows(r.begin, r.count);
    }

    /// m[s, c] = sum_ab T[a,b,c] L[s,a] R[s,b] for node's tensor.
    MatrixXd local_vector(const TtnModel& model, Index node, Rows r) const {
        const TreeTopology& topo = model.topology();
        const TensorD& t = model.tensor(node);
        const Index da = t.dim(0), db = t.dim(1), dc = t.dim(2);
        const MatrixXd lmat = slot_rows(model, topo.left_slot(node), r);
        const MatrixXd rmat = slot_rows(model, topo.right_slot(node), r);
        MatrixXd out = MatrixXd::Zero(r.count, dc);
        for (Index a = 0; a < da; ++a) {
            Eigen::Map<const MatrixX<double>> slab(t.data() + a * db * dc, db, dc);
            MatrixXd x = rmat * slab;
            out.array() += x.array().colwise() * lmat.col(a).array();
        }
        return out;
    }

    void refresh_down(const TtnModel& model, Index node) {
        down_[static_cast<std::size_t>(node)] =
            local_vector(model, node, Rows{0, n_});
    }

    /// up_[m] from the parent's tensor, the sibling's down matrix, and up_[p].
    void refresh_up(const TtnModel& model, Index m) {
        const TreeTopology& topo = model.topology();
        const Index p = topo.parent(m);
        const bool is_left = (topo.left_slot(p) == m);
        const Index sib = is_left ? topo.right_slot(p) : topo.left_slot(p);
        const TensorD& t = model.tensor(p);
        const Index da = t.dim(0), db = t.dim(1), dp = t.dim(2);
        const MatrixXd smat = slot_rows(model, sib, Rows{0, n_});
        const MatrixXd& u = up_[static_cast<std::size_t>(p)];
        const Index dm = is_left ? da : db;
        const Index ds = is_left ? db : da;

        MatrixXd out = MatrixXd::Zero(n_, dm * nl_);
        // reorder T so the child leg of m is leading: T'[c, b, pp]
        // (a view when m is the left child, an explicit permute otherwise)
        TensorD tp;
        const TensorD* tsrc = &t;
        if (!is_left) {
            const Index order[] = {1, 0, 2};
            tp = permuted(t, std::span<const Index>(order, 3));
            tsrc = &tp;
        }
        Eigen::Map<const MatrixX<double>> mflat(tsrc->data(), dm * ds, dp);
        for (Index l = 0; l < nl_; ++l) {
            MatrixXd w(n_, dp);
            for (Index pp = 0; pp < dp; ++pp) w.col(pp) = u.col(pp * nl_ + l);
            MatrixXd y = w * mflat.transpose();  // n x (dm*ds)
            for (Index c = 0; c < dm; ++c) {
                auto dst = out.col(c * nl_ + l);
                for (Index b = 0; b < ds; ++b)
                    dst.array() += y.col(c * ds + b).array() * smat.col(b).array();
            }
        }
        up_[static_cast<std::size_t>(m)] = std::move(out);
    }

    std::vector<int> labels_;
    Index nl_ = 0;
    Index n_ = 0;
    std::vector<MatrixXd> leaf_;
    std::vector<MatrixXd> down_;
    std::vector<MatrixXd> up_;
};

/// Polak-Ribiere CG with Armijo backtracking on the local tensor.
/// Returns the number of accepted steps; the model tensor is updated in place.
int optimize_local(TtnModel& model, const EnvCache& cache, Rows rows,
                   const TrainConfig& cfg) {
    TensorD& t = model.tensor(model.canonical_center());
    const Index dim = t.numel();
    auto as_vec = [&](TensorD& x) {
        return Eigen::Map<VectorXd>(x.data(), x.numel());
    };

    const double wd = cfg.weight_decay;

    double f0;
    TensorD g = cache.gradient_at_center(model, rows, cfg.loss, &f0);
    if (!std::isfinite(f0))
        throw NumericError("train: non-finite loss at node " +
                           std::to_string(model.canonical_center()));
    VectorXd gv = as_vec(g);
    if (wd > 0) {
        f0 += wd * as_vec(t).squaredNorm();
        gv += 2.0 * wd * as_vec(t);
    }
    if (gv.norm() < cfg.cg_tolerance) return 0;
    VectorXd d = -gv;
    VectorXd x0(dim);
    double t0 = 1.0;
    int accepted = 0;

    for (Index it = 0; it < cfg.cg_iters_per_node; ++it) {
        double gd = gv.dot(d);
        if (gd >= 0) {  // restart on a non-descent direction
            d = -gv;
            gd = gv.dot(d);
        }
        x0 = as_vec(t);
        double step = t0;
        bool ok = false;
        double f1 = f0;
        for (int bt = 0; bt < 45; ++bt) {
            as_vec(t) = x0 + step * d;
            f1 = cache.loss_at_center(model, rows, cfg.loss);
            if (wd > 0) f1 += wd * as_vec(t).squaredNorm();
            if (std::isfinite(f1) && f1 <= f0 + 1e-4 * step * gd) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) {
            as_vec(t) = x0;
            break;
        }
        ++accepted;
        t0 = std::clamp(step * 2.0, 1e-8, 1e4);
        f0 = f1;
        TensorD gn = cache.gradient_at_center(model, rows, cfg.loss, nullptr);
        VectorXd gnv = as_vec(gn);
        if (wd > 0) gnv += 2.0 * wd * as_vec(t);
        const double beta = std::max(0.0, gnv.dot(gnv - gv) / gv.squaredNorm());
        d = -gnv + beta * d;
        gv = gnv;
        if (gv.norm() < cfg.cg_tolerance) break;
    }
    return accepted;
}

}  // namespace

LabeledBatch encode_dataset(const Dataset& ds, const FeatureSpec& spec) {
    LabeledBatch out;
    out.labels = ds.labels;
    out.samples.reserve(static_cast<std::size_t>(ds.n()));
    for (Index i = 0; i < ds.n(); ++i) out.samples.push_back(encode(ds.row(i), spec));
    return out;
}

TtnModel init_model(const TreeTopology& topology, Index n_classes,
                    const FeatureSpec& spec, Index chi_max, std::uint64_t seed) {
    if (chi_max < 1) throw ConfigError("init_model: chi_max must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    auto bond = [&](Index slot) -> Index {
        if (!topology.is_internal_slot(slot))
            return topology.leaf_padded(topology.leaf_of_slot(slot)) ? 1 : 2;
        return std::min(chi_max, topology.slot_phys_product(slot));
    };
    // near-product start: uniform rank-1 tensors with a small random
    // perturbation, so unused directions begin (and tend to stay) unentangled
    constexpr double kInitNoise = 0.05;
    std::vector<TensorD> tensors;
    for (Index n = 0; n < topology.n_internal(); ++n) {
        const Index da = bond(topology.left_slot(n));
        const Index db = bond(topology.right_slot(n));
        const Index dp = (n == 0) ? n_classes : std::min(chi_max, bond(n));
        TensorD t({da, db, dp});
        const double base = 1.0 / std::sqrt(double(da * db * dp));
        for (Index i = 0; i < t.numel(); ++i) t[i] = base + kInitNoise * g(rng);
        tensors.push_back(std::move(t));
    }
    TtnModel raw(topology, n_classes, spec, std::move(tensors));
    TtnModel m = canonicalize(raw, 0);
    m.tensor(0) *= 1.0 / m.tensor(0).frobenius_norm();
    return m;
}

double loss(const TtnModel& model, const LabeledBatch& batch, LossKind kind) {
    if (batch.samples.empty()) throw DataError("loss: empty batch");
    const Index nl = model.n_classes();
    double total = 0;
    for (std::size_t s = 0; s < batch.samples.size(); ++s) {
        const Eigen::VectorXd f = overlaps(model, batch.samples[s]);
        const int y = batch.labels[s];
        const double fs_sq = f.squaredNorm();
        if (!(fs_sq > 0) || !std::isfinite(fs_sq)) {
            total += kDegeneratePenalty;
            continue;
        }
        if (kind == LossKind::nll) {
            total += -std::log(std::max(f(y) * f(y) / fs_sq, 1e-290));
        } else {
            for (Index l = 0; l < nl; ++l) {
                const double e = f(l) * f(l) / fs_sq - (l == y ? 1.0 : 0.0);
                total += e * e;
            }
        }
    }
    return total / static_cast<double>(batch.samples.size());
}

TensorD local_gradient(const TtnModel& model, Index node, const LabeledBatch& batch,
                       LossKind kind) {
    if (model.canonical_center() != node)
        throw NumericError("local_gradient: model must be canonical at the node");
    if (batch.samples.empty()) throw DataError("local_gradient: empty batch");
    EnvCache cache(model, batch);
    return cache.gradient_at_center(
        model, Rows{0, static_cast<Index>(batch.samples.size())}, kind, nullptr);
}

double accuracy(const TtnModel& model, const LabeledBatch& batch) {
    Index correct = 0;
    for (std::size_t s = 0; s < batch.samples.size(); ++s) {
        const Eigen::VectorXd f = overlaps(model, batch.samples[s]).cwiseAbs();
        Index best;
        f.maxCoeff(&best);
        if (best == batch.labels[s]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch.samples.size());
}

std::pair<TtnModel, TrainReport> train(const TtnModel& model, const Dataset& dataset,
                                       const TrainConfig& config) {
    config.validate();
    if (dataset.n() < 1) throw DataError("train: empty dataset");
    if (dataset.n_features() != model.topology().n_features())
        throw DataError("train: dataset features do not match model topology");

    TrainReport report;
    if (config.n_sweeps == 0) return {model, report};

    // deterministic stratified carve of the validation slice
    std::mt19937_64 rng(config.seed);
    std::vector<Index> train_rows, val_rows;
    {
        std::vector<Index> by_class[2];
        for (Index i = 0; i < dataset.n(); ++i)
            by_class[dataset.labels[static_cast<std::size_t>(i)]].push_back(i);
        for (auto& idx : by_class) {
            std::shuffle(idx.begin(), idx.end(), rng);
            const auto n_val = static_cast<std::size_t>(
                std::llround(config.val_fraction * double(idx.size())));
            for (std::size_t i = 0; i < idx.size(); ++i)
                (i < n_val ? val_rows : train_rows).push_back(idx[i]);
        }
        std::shuffle(train_rows.begin(), train_rows.end(), rng);  // batch order
    }
    if (train_rows.empty()) throw DataError("train: no training rows left");

    const FeatureSpec& spec = model.feature_spec();
    LabeledBatch train_batch, val_batch;
    for (Index i : train_rows) {
        train_batch.samples.push_back(encode(dataset.row(i), spec));
        train_batch.labels.push_back(dataset.labels[static_cast<std::size_t>(i)]);
    }
    for (Index i : val_rows) {
        val_batch.samples.push_back(encode(dataset.row(i), spec));
        val_batch.labels.push_back(dataset.labels[static_cast<std::size_t>(i)]);
    }

    TtnModel current = canonicalize(model, 0);
    EnvCache cache(current, train_batch);
    const Index n = cache.n_samples();
    const Index bs = (config.batch_size > 0 && config.batch_size < n)
                         ? config.batch_size
                         : n;
    Index offset = 0;
    auto next_rows = [&]() {
        if (bs == n) return Rows{0, n};
        if (offset + bs > n) offset = 0;
        Rows r{offset, bs};
        offset += bs;
        return r;
    };

    TtnModel best = current;
    double best_score = -1;
    Index best_sweep = -1;
    Index since_best = 0;

    // depth-first sweep: optimize on first visit, walk the center edge by edge
    auto visit = [&](auto&& self, Index node) -> void {
        optimize_local(current, cache, next_rows(), config);
        const TreeTopology& topo = current.topology();
        for (bool right : {false, true}) {
            const Index child = right ? topo.right_slot(node) : topo.left_slot(node);
            if (!topo.is_internal_slot(child)) continue;
            cache.move_to_child(current, right);
            self(self, child);
            cache.move_to_parent(current);
        }
    };

    for (Index sweep = 0; sweep < config.n_sweeps; ++sweep) {
        const auto t_start = std::chrono::steady_clock::now();
        visit(visit, 0);
        const Rows all{0, n};
        const double sweep_loss = cache.loss_at_center(current, all, config.loss);
        if (!std::isfinite(sweep_loss))
            throw NumericError("train: non-finite loss after sweep " +
                               std::to_string(sweep));
        const double train_acc = cache.accuracy_at_center(current, all);
        const double val_acc =
            val_batch.samples.empty() ? train_acc : accuracy(current, val_batch);
        const auto t_end = std::chrono::steady_clock::now();

        report.sweep_loss.push_back(sweep_loss);
        report.train_accuracy.push_back(train_acc);
        report.val_accuracy.push_back(val_acc);
        report.wall_seconds.push_back(
            std::chrono::duration<double>(t_end - t_start).count());

        if (val_acc > best_score) {
            best_score = val_acc;
            best = current;
            best_sweep = sweep;
            since_best = 0;
        } else if (config.early_stop_patience > 0 &&
                   ++since_best > config.early_stop_patience) {
            break;
        }
    }

    report.best_sweep = best_sweep;
    for (Index k = 0; k < best.topology().n_internal(); ++k)
        report.final_bond_dims.push_back(best.tensor(k).dim(2));
    return {best, report};
}

void write_train_report(const TrainReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_train_report: cannot open " + path);
    out << "# sweep loss train_acc val_acc wall_s\n";
    char buf[160];
    for (std::size_t i = 0; i < r.sweep_loss.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu %.12g %.12g %.12g %.6g\n", i,
                      r.sweep_loss[i], r.train_accuracy[i], r.val_accuracy[i],
                      r.wall_seconds[i]);
        out << buf;
    }
    out << "# best_sweep " << r.best_sweep << "\n";
}

}  // namespace ttnc
