#include "ttnc/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace ttnc {

static_assert(std::endian::native == std::endian::little,
              "model file layout assumes a little-endian host");

namespace {

/// Thin QR with the sign convention diag(R) >= 0, so that the QR of an
/// isometry returns the isometry itself and R = I.
std::pair<TensorD, TensorD> qr_signed(const TensorD& t, std::initializer_list<Index> left) {
    auto [q, r] = qr_split(t, left);
    const Index k = r.dim(0);
    const Index cols = r.numel() / k;
    const Index rows = q.numel() / k;
    Eigen::Map<MatrixX<double>> mq(q.data(), rows, k);
    Eigen::Map<MatrixX<double>> mr(r.data(), k, cols);
    for (Index i = 0; i < k; ++i) {
        if (mr(i, i) < 0) {
            mr.row(i) *= -1.0;
            mq.col(i) *= -1.0;
        }
    }
    return {std::move(q), std::move(r)};
}

}  // namespace

TtnModel::TtnModel(TreeTopology topology, Index n_classes, FeatureSpec spec,
                   std::vector<TensorD> tensors, Index canonical_center)
    : topo_(std::move(topology)),
      n_classes_(n_classes),
      spec_(std::move(spec)),
      tensors_(std::move(tensors)),
      center_(canonical_center) {
    validate();
}

Index TtnModel::slot_dim(Index slot) const {
    if (topo_.is_internal_slot(slot)) return tensor(slot).dim(2);
    return leaf_dim(topo_.leaf_of_slot(slot));
}

void TtnModel::validate() const {
    if (static_cast<Index>(tensors_.size()) != topo_.n_internal())
        throw NumericError("TtnModel: tensor count does not match topology");
    if (static_cast<Index>(spec_.size()) != topo_.n_features())
        throw NumericError("TtnModel: feature spec length mismatch");
    for (Index n = 0; n < topo_.n_internal(); ++n) {
        const TensorD& t = tensor(n);
        if (t.rank() != 3) throw NumericError("TtnModel: node tensors must be order 3");
        if (t.dim(0) != slot_dim(topo_.left_slot(n)) ||
            t.dim(1) != slot_dim(topo_.right_slot(n)))
            throw NumericError("TtnModel: extents disagree along an edge");
    }
    if (tensor(0).dim(2) != n_classes_)
        throw NumericError("TtnModel: root label leg does not match class count");
}

void TtnModel::isometrize_toward_parent(Index node) {
    if (node <= 0 || node >= topo_.n_internal())
        throw NumericError("isometrize_toward_parent: invalid node");
    auto [q, r] = qr_signed(tensor(node), {0, 1});
    tensor(node) = std::move(q);
    const Index p = topo_.parent(node);
    TensorD& tp = tensor(p);
    if (topo_.left_slot(p) == node) {
        tp = contract(r, tp, {{1, 0}});  // (k, right, parent)
    } else {
        TensorD c = contract(r, tp, {{1, 1}});  // (k, left, parent)
        const Index order[] = {1, 0, 2};
        tp = permuted(c, std::span<const Index>(order, 3));
    }
}

void TtnModel::move_center_to_child(bool right) {
    const Index n = center_;
    if (n < 0) throw NumericError("move_center_to_child: no canonical center");
    const Index child = right ? topo_.right_slot(n) : topo_.left_slot(n);
    if (!topo_.is_internal_slot(child))
        throw NumericError("move_center_to_child: child slot is a leaf");
    if (!right) {
        auto [q, r] = qr_signed(tensor(n), {1, 2});  // q: (right, parent, k)
        const Index order[] = {2, 0, 1};
        tensor(n) = permuted(q, std::span<const Index>(order, 3));
        tensor(child) = contract(tensor(child), r, {{2, 1}});
    } else {
        auto [q, r] = qr_signed(tensor(n), {0, 2});  // q: (left, parent, k)
        const Index order[] = {0, 2, 1};
        tensor(n) = permuted(q, std::span<const Index>(order, 3));
        tensor(child) = contract(tensor(child), r, {{2, 1}});
    }
    center_ = child;
}

void TtnModel::move_center_to_parent() {
    if (center_ <= 0) throw NumericError("move_center_to_parent: center at root or unset");
    const Index n = center_;
    isometrize_toward_parent(n);
    center_ = topo_.parent(n);
}

void TtnModel::scale(double a) {
    for (auto& t : tensors_) t *= a;
}

EncodedSample encode(std::span<const double> features, const FeatureSpec& spec) {
    if (features.size() != spec.size())
        throw DataError("encode: feature count does not match spec");
    EncodedSample out;
    out.raw.assign(features.begin(), features.end());
    out.states.reserve(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double x = features[i];
        if (!std::isfinite(x)) throw DataError("encode: non-finite feature value");
        double xp;
        if (spec[i].kind == FeatureKind::charge) {
            xp = (x + 1.0) / 2.0;
        } else {
            if (spec[i].x_max <= 0) throw DataError("encode: x_max must be positive");
            xp = x / spec[i].x_max;
        }
        xp = std::clamp(xp, 0.0, 1.0);
        const double a = std::numbers::pi * xp / 2.0;
        out.states.emplace_back(std::cos(a), std::sin(a));
    }
    return out;
}

Eigen::Vector2d leaf_state(const TtnModel& model, const EncodedSample& sample, Index leaf) {
    const Index f = model.topology().leaf_feature(leaf);
    if (f < 0) return {1.0, 0.0};
    return sample.states[static_cast<std::size_t>(f)];
}

namespace {

Eigen::VectorXd slot_vector(const TtnModel& m, const EncodedSample& s, Index slot) {
    const TreeTopology& topo = m.topology();
    if (!topo.is_internal_slot(slot)) {
        const Index leaf = topo.leaf_of_slot(slot);
        const Eigen::Vector2d v = leaf_state(m, s, leaf);
        return v.head(m.leaf_dim(leaf));
    }
    const Eigen::VectorXd vl = slot_vector(m, s, topo.left_slot(slot));
    const Eigen::VectorXd vr = slot_vector(m, s, topo.right_slot(slot));
    const TensorD& t = m.tensor(slot);
    const Index da = t.dim(0), db = t.dim(1), dc = t.dim(2);
    Eigen::VectorXd w(da * db);
    for (Index a = 0; a < da; ++a) w.segment(a * db, db) = vl(a) * vr;
    return Eigen::Map<const MatrixX<double>>(t.data(), da * db, dc).transpose() * w;
}

}  // namespace

Eigen::VectorXd overlaps(const TtnModel& model, const EncodedSample& sample) {
    if (static_cast<Index>(sample.states.size()) != model.topology().n_features())
        throw DataError("classify: sample length does not match model topology");
    return slot_vector(model, sample, 0);
}

PredictionResult decide(const Eigen::VectorXd& raw, double delta) {
    PredictionResult out;
    out.raw_overlaps = raw.cwiseAbs();
    const double total = raw.squaredNorm();
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericError("classify: degenerate model, all overlaps vanish");
    out.confidences = raw.array().square() / total;
    if (raw.size() == 2) {
        const double pb = out.confidences(0);
        if (pb > 0.5 + delta / 2.0)
            out.decision = 0;
        else if (pb < 0.5 - delta / 2.0)
            out.decision = 1;
        else
            out.decision = kAbstain;
    } else {
        Index best;
        out.confidences.maxCoeff(&best);
        out.decision = static_cast<int>(best);
    }
    return out;
}

PredictionResult classify(const TtnModel& model, const EncodedSample& sample, double delta) {
    return decide(overlaps(model, sample), delta);
}

TtnModel canonicalize(const TtnModel& model, Index center) {
    const TreeTopology& topo = model.topology();
    if (center < 0 || center >= topo.n_internal())
        throw NumericError("canonicalize: invalid center node");
    TtnModel out = model;
    if (out.canonical_center() < 0) {
        for (Index n = topo.n_internal() - 1; n >= 1; --n) out.isometrize_toward_parent(n);
        out.set_center(0);
    }
    // walk the gauge center along the tree path to the target
    std::vector<bool> target_anc(static_cast<std::size_t>(topo.n_internal()), false);
    for (Index n = center;; n = topo.parent(n)) {
        target_anc[static_cast<std::size_t>(n)] = true;
        if (n == 0) break;
    }
    while (!target_anc[static_cast<std::size_t>(out.canonical_center())])
        out.move_center_to_parent();
    std::vector<Index> path;
    for (Index n = center; n != out.canonical_center(); n = topo.parent(n))
        path.push_back(n);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        const Index p = topo.parent(*it);
        out.move_center_to_child(topo.right_slot(p) == *it);
    }
    return out;
}

namespace {

TensorD expand_node(const TtnModel& m, Index node) {
    const TreeTopology& topo = m.topology();
    TensorD t = m.tensor(node);
    const Index ls = topo.left_slot(node), rs = topo.right_slot(node);
    if (topo.is_internal_slot(ls)) {
        TensorD lex = expand_node(m, ls);
        t = contract(lex, t, {{lex.rank() - 1, 0}});  // (left leaves..., r, p)
    }
    if (topo.is_internal_slot(rs)) {
        TensorD rex = expand_node(m, rs);
        const Index pos_r = t.rank() - 2;
        TensorD c = contract(t, rex, {{pos_r, rex.rank() - 1}});
        // (left leaves..., p, right leaves...) -> move p to the back
        std::vector<Index> order;
        const Index n_left = pos_r;
        for (Index k = 0; k < n_left; ++k) order.push_back(k);
        for (Index k = n_left + 1; k < c.rank(); ++k) order.push_back(k);
        order.push_back(n_left);
        t = permuted(c, std::span<const Index>(order));
    }
    return t;
}

}  // namespace

TensorD full_expand(const TtnModel& model) {
    if (model.topology().n_leaves() > 12)
        throw NumericError("full_expand: refusing more than 12 leaves");
    return expand_node(model, 0);
}

TtnModel slice_label(const TtnModel& model, Index label) {
    if (label < 0 || label >= model.n_classes())
        throw NumericError("slice_label: label out of range");
    std::vector<TensorD> tensors = model.tensors();
    const TensorD& root = tensors[0];
    TensorD sliced({root.dim(0), root.dim(1), 1});
    for (Index a = 0; a < root.dim(0); ++a)
        for (Index b = 0; b < root.dim(1); ++b)
            sliced(a, b, 0) = root(a, b, label);
    tensors[0] = std::move(sliced);
    // slicing the label leg breaks the root's isometry, so the canonical
    // marker only survives when the root itself is the center
    const Index center = model.canonical_center() == 0 ? 0 : -1;
    return TtnModel(model.topology(), 1, model.feature_spec(), std::move(tensors),
                    center);
}

namespace {

MatrixX<double> transfer_slot(const TtnModel& a, const TtnModel& b, Index slot) {
    const TreeTopology& topo = a.topology();
    if (!topo.is_internal_slot(slot)) {
        const Index d = a.leaf_dim(topo.leaf_of_slot(slot));
        return MatrixX<double>::Identity(d, d);
    }
    const MatrixX<double> ml = transfer_slot(a, b, topo.left_slot(slot));
    const MatrixX<double> mr = transfer_slot(a, b, topo.right_slot(slot));
    const TensorD& ta = a.tensor(slot);
    const TensorD& tb = b.tensor(slot);
    TensorD tml({ml.rows(), ml.cols()},
                std::vector<double>(ml.data(), ml.data() + ml.size()));
    TensorD tmr({mr.rows(), mr.cols()},
                std::vector<double>(mr.data(), mr.data() + mr.size()));
    TensorD x = contract(tml, ta, {{0, 0}});   // (a', b, p)
    TensorD y = contract(tmr, x, {{0, 1}});    // (b', a', p)
    TensorD z = contract(y, tb, {{1, 0}, {0, 1}});  // (p, q)
    MatrixX<double> out(z.dim(0), z.dim(1));
    std::memcpy(out.data(), z.data(), sizeof(double) * static_cast<std::size_t>(z.numel()));
    return out;
}

}  // namespace

Eigen::VectorXd label_overlaps(const TtnModel& a, const TtnModel& b) {
    if (a.n_classes() != b.n_classes() ||
        a.topology().n_leaves() != b.topology().n_leaves())
        throw NumericError("label_overlaps: incompatible models");
    const MatrixX<double> m = transfer_slot(a, b, 0);
    return m.diagonal();
}

Eigen::VectorXd label_norms_sq(const TtnModel& model) {
    return label_overlaps(model, model);
}

// --- binary model container -------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'T', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32(const unsigned char* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

struct Writer {
    std::string buf;
    void bytes(const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
};

struct Reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t pos = 0;
    void need(std::size_t k) const {
        if (pos + k > n) throw DataError("model file truncated");
    }
    void bytes(void* out, std::size_t k) {
        need(k);
        std::memcpy(out, p + pos, k);
        pos += k;
    }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::int32_t i32() { std::int32_t v; bytes(&v, 4); return v; }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    std::string str() {
        std::uint32_t k = u32();
        need(k);
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
};

}  // namespace

void save_model(const TtnModel& model, const std::string& path) {
    const TreeTopology& topo = model.topology();
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(topo.n_leaves()));
    w.u32(static_cast<std::uint32_t>(topo.n_features()));
    w.u32(static_cast<std::uint32_t>(model.n_classes()));
    w.i32(static_cast<std::int32_t>(model.canonical_center()));
    for (Index leaf = 0; leaf < topo.n_leaves(); ++leaf)
        w.i32(static_cast<std::int32_t>(topo.leaf_feature(leaf)));
    // per-edge bond dims (parent leg of every internal node, root = label leg)
    for (Index n = 0; n < topo.n_internal(); ++n)
        w.u32(static_cast<std::uint32_t>(model.tensor(n).dim(2)));
    for (const FeatureDef& f : model.feature_spec()) {
        w.str(f.name);
        w.f64(f.x_max);
        w.u8(static_cast<std::uint8_t>(f.kind));
    }
    for (Index n = 0; n < topo.n_internal(); ++n) {
        const TensorD& t = model.tensor(n);
        for (Index k = 0; k < 3; ++k) w.u32(static_cast<std::uint32_t>(t.dim(k)));
        w.bytes(t.data(), sizeof(double) * static_cast<std::size_t>(t.numel()));
    }
    const std::uint32_t crc =
        crc32(reinterpret_cast<const unsigned char*>(w.buf.data()), w.buf.size());
    w.u32(crc);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_model: cannot open " + path);
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw DataError("save_model: write failed for " + path);
}

TtnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_model: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12) throw DataError("model file truncated");

    const auto* raw = reinterpret_cast<const unsigned char*>(buf.data());
    std::uint32_t stored;
    std::memcpy(&stored, raw + buf.size() - 4, 4);
    if (crc32(raw, buf.size() - 4) != stored)
        throw DataError("model file corrupted (checksum mismatch)");

    Reader r{raw, buf.size() - 4};
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a model file");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported model file version " + std::to_string(version));

    const Index n_leaves = r.u32();
    const Index n_features = r.u32();
    const Index n_classes = r.u32();
    const Index center = r.i32();
    std::vector<Index> layout(static_cast<std::size_t>(n_features), -1);
    for (Index leaf = 0; leaf < n_leaves; ++leaf) {
        const Index f = r.i32();
        if (f >= 0) {
            if (f >= n_features) throw DataError("model file: bad leaf layout");
            layout[static_cast<std::size_t>(f)] = leaf;
        }
    }
    TreeTopology topo = TreeTopology::with_layout(n_features, layout);
    std::vector<Index> bond(static_cast<std::size_t>(topo.n_internal()));
    for (auto& b : bond) b = r.u32();
    FeatureSpec spec(static_cast<std::size_t>(n_features));
    for (auto& f : spec) {
        f.name = r.str();
        f.x_max = r.f64();
        f.kind = static_cast<FeatureKind>(r.u8());
    }
    std::vector<TensorD> tensors;
    tensors.reserve(static_cast<std::size_t>(topo.n_internal()));
    for (Index n = 0; n < topo.n_internal(); ++n) {
        std::vector<Index> shape(3);
        for (auto& d : shape) d = r.u32();
        if (shape[2] != bond[static_cast<std::size_t>(n)])
            throw DataError("model file: header bond dims disagree with payload");
        TensorD t(shape);
        r.bytes(t.data(), sizeof(double) * static_cast<std::size_t>(t.numel()));
        tensors.push_back(std::move(t));
    }
    try {
        return TtnModel(std::move(topo), n_classes, std::move(spec), std::move(tensors),
                        center);
    } catch (const NumericError& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

}  // namespace ttnc
