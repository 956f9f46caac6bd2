#include "ttnc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace ttnc {

const std::vector<std::string>& jet_feature_names() {
    static const std::vector<std::string> names = {
        "mu_q", "mu_pt", "mu_dr", "k_q", "k_pt", "k_dr", "pi_q", "pi_pt",
        "pi_dr", "e_q",  "e_pt",  "e_dr", "p_q", "p_pt", "p_dr", "Q"};
    return names;
}

std::vector<FeatureKind> jet_feature_kinds() {
    std::vector<FeatureKind> kinds(static_cast<std::size_t>(kJetFeatureCount),
                                   FeatureKind::continuous);
    for (std::size_t p = 0; p < kParticleTypes.size(); ++p)
        kinds[3 * p] = FeatureKind::charge;
    kinds[15] = FeatureKind::charge;  // Q in [-1, 1] uses the same shift map
    return kinds;
}

double jet_charge(const std::vector<std::pair<double, double>>& particles,
                  bool* degenerate) {
    double num = 0, den = 0;
    for (auto [q, pt] : particles) {
        num += pt * q;
        den += pt;
    }
    if (degenerate) *degenerate = (den <= 0);
    if (den <= 0) return 0.0;
    return num / den;
}

double pseudorapidity(double theta) {
    if (!(theta > 0.0) || !(theta < std::numbers::pi))
        throw DataError("pseudorapidity: theta must lie in (0, pi)");
    return -std::log(std::tan(theta / 2.0));
}

double delta_r(double deta, double dphi) {
    return std::hypot(deta, dphi);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("load_csv: empty file " + path);
    std::vector<std::string> header = split_line(line);
    const auto& names = jet_feature_names();
    if (header.size() < 2 || header.back() != "label")
        throw DataError("load_csv: last column must be 'label'");
    // feature columns must form an ordered subset of the jet schema, so a
    // QuIPS-reduced file stays loadable
    std::vector<std::string> cols(header.begin(), header.end() - 1);
    std::size_t cursor = 0;
    for (const std::string& name : cols) {
        while (cursor < names.size() && names[cursor] != name) ++cursor;
        if (cursor == names.size())
            throw DataError("load_csv: column '" + name +
                            "' does not follow the jet feature schema");
        ++cursor;
    }

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError("load_csv: row " + std::to_string(lineno) +
                            " has " + std::to_string(cells.size()) + " cells");
        std::vector<double> row(cols.size());
        for (std::size_t j = 0; j < cols.size(); ++j) {
            char* end = nullptr;
            const std::string& cell = cells[j];
            row[j] = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() ||
                !std::isfinite(row[j]))
                throw DataError("load_csv: non-numeric cell at row " +
                                std::to_string(lineno) + ", column '" + cols[j] + "'");
        }
        const std::string& lab = cells.back();
        if (lab == "b")
            labels.push_back(kLabelB);
        else if (lab == "bbar")
            labels.push_back(kLabelBbar);
        else
            throw DataError("load_csv: bad label '" + lab + "' at row " +
                            std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("load_csv: no data rows in " + path);

    Dataset ds;
    ds.names = cols;
    const auto nf = static_cast<Index>(cols.size());
    ds.features.resize(static_cast<Index>(rows.size()), nf);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Index j = 0; j < nf; ++j)
            ds.features(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    ds.labels = std::move(labels);
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_csv: cannot open " + path);
    for (std::size_t j = 0; j < ds.names.size(); ++j) out << ds.names[j] << ',';
    out << "label\n";
    char buf[40];
    for (Index i = 0; i < ds.n(); ++i) {
        for (Index j = 0; j < ds.n_features(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
            out << buf << ',';
        }
        out << (ds.labels[static_cast<std::size_t>(i)] == kLabelB ? "b" : "bbar") << '\n';
    }
    if (!out) throw DataError("save_csv: write failed for " + path);
}

FeatureSpec fit_feature_spec(const Dataset& train) {
    FeatureSpec spec(static_cast<std::size_t>(train.n_features()));
    for (Index j = 0; j < train.n_features(); ++j) {
        FeatureDef& f = spec[static_cast<std::size_t>(j)];
        f.name = train.names[static_cast<std::size_t>(j)];
        const bool charge_like = f.name == "Q" || f.name.ends_with("_q");
        if (charge_like) {
            f.kind = FeatureKind::charge;
            f.x_max = 1.0;
        } else {
            f.kind = FeatureKind::continuous;
            f.x_max = std::max(train.features.col(j).maxCoeff(), 1e-12);
        }
    }
    return spec;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<Index>& idx) {
    Dataset out;
    out.names = ds.names;
    out.spec = ds.spec;
    out.features.resize(static_cast<Index>(idx.size()), ds.n_features());
    out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.features.row(static_cast<Index>(i)) = ds.features.row(idx[i]);
        out.labels[i] = ds.labels[static_cast<std::size_t>(idx[i])];
    }
    return out;
}

}  // namespace

SplitResult split(const Dataset& ds, const SplitSpec& s) {
    if (ds.n() < 10) throw DataError("split: need at least 10 samples");
    if (!(s.train_fraction > 0 && s.train_fraction < 1) ||
        !(s.val_fraction >= 0 && s.val_fraction < 1))
        throw ConfigError("split: fractions out of range");

    std::mt19937_64 rng(s.seed);
    std::vector<Index> train_idx, val_idx, test_idx;
    for (int cls : {kLabelB, kLabelBbar}) {
        std::vector<Index> idx;
        for (Index i = 0; i < ds.n(); ++i)
            if (ds.labels[static_cast<std::size_t>(i)] == cls) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_train =
            static_cast<std::size_t>(std::llround(s.train_fraction * double(idx.size())));
        const auto n_val =
            static_cast<std::size_t>(std::llround(s.val_fraction * double(n_train)));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i < n_train - n_val)
                train_idx.push_back(idx[i]);
            else if (i < n_train)
                val_idx.push_back(idx[i]);
            else
                test_idx.push_back(idx[i]);
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    SplitResult out{take_rows(ds, train_idx), take_rows(ds, val_idx),
                    take_rows(ds, test_idx)};
    out.train.spec = fit_feature_spec(out.train);
    out.validation.spec = out.train.spec;
    out.test.spec = out.train.spec;
    return out;
}

Dataset synth_generate(const SynthConfig& cfg) {
    if (cfg.n_events < 1) throw ConfigError("synth: n_events must be positive");
    bool any_signal = cfg.jet_charge_signal > 0;
    for (const auto& p : cfg.particles)
        any_signal = any_signal || p.q_signal > 0 || p.pt_signal > 0 || p.dr_signal > 0;
    if (cfg.require_signal && !any_signal)
        throw ConfigError("synth: plan has no informative feature");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;

    Dataset ds;
    ds.names = jet_feature_names();
    ds.features.resize(cfg.n_events, kJetFeatureCount);
    ds.labels.resize(static_cast<std::size_t>(cfg.n_events));

    for (Index i = 0; i < cfg.n_events; ++i) {
        const int y = (u(rng) < 0.5) ? kLabelB : kLabelBbar;
        // b-jet convention: the tagging lepton charge is negative
        const double favored_q = (y == kLabelB) ? -1.0 : 1.0;
        const double shift_sign = (y == kLabelB) ? 1.0 : -1.0;
        ds.labels[static_cast<std::size_t>(i)] = y;

        std::vector<std::pair<double, double>> present;
        for (std::size_t p = 0; p < cfg.particles.size(); ++p) {
            const ParticlePlan& plan = cfg.particles[p];
            const Index base = static_cast<Index>(3 * p);
            if (u(rng) >= plan.presence) {
                ds.features(i, base) = 0;
                ds.features(i, base + 1) = 0;
                ds.features(i, base + 2) = 0;
                continue;
            }
            // with no signal the charge is uniform over its allowed values,
            // otherwise it matches the label convention with P = 0.5 + s/2
            const double q =
                plan.q_signal > 0
                    ? ((u(rng) < 0.5 + plan.q_signal / 2.0) ? favored_q : -favored_q)
                    : std::floor(u(rng) * 3.0) - 1.0;
            const double pt =
                std::abs(g(rng) + 2.0 + 0.8 * plan.pt_signal * shift_sign);
            const double dr =
                std::abs(0.1 * g(rng) + 0.25 + 0.12 * plan.dr_signal * shift_sign);
            ds.features(i, base) = q;
            ds.features(i, base + 1) = pt;
            ds.features(i, base + 2) = dr;
            present.emplace_back(q, pt);
        }
        double q_jet;
        if (cfg.derive_jet_charge) {
            q_jet = jet_charge(present);
        } else {
            q_jet = std::clamp(0.3 * g(rng) + 0.35 * cfg.jet_charge_signal * favored_q,
                               -1.0, 1.0);
        }
        ds.features(i, 15) = q_jet;
    }
    return ds;
}

std::vector<double> planned_signal(const SynthConfig& cfg) {
    std::vector<double> s(static_cast<std::size_t>(kJetFeatureCount), 0.0);
    double max_q = 0;
    for (std::size_t p = 0; p < cfg.particles.size(); ++p) {
        s[3 * p] = cfg.particles[p].q_signal;
        s[3 * p + 1] = cfg.particles[p].pt_signal;
        s[3 * p + 2] = cfg.particles[p].dr_signal;
        max_q = std::max(max_q, cfg.particles[p].q_signal * cfg.particles[p].presence);
    }
    s[15] = cfg.derive_jet_charge ? max_q : cfg.jet_charge_signal;
    return s;
}

Dataset restrict_columns(const Dataset& ds, const std::vector<Index>& keep) {
    if (keep.empty()) throw DataError("restrict_columns: empty feature selection");
    Dataset out;
    out.features.resize(ds.n(), static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        if (keep[j] < 0 || keep[j] >= ds.n_features())
            throw DataError("restrict_columns: column index out of range");
        out.features.col(static_cast<Index>(j)) = ds.features.col(keep[j]);
        out.names.push_back(ds.names[static_cast<std::size_t>(keep[j])]);
        if (!ds.spec.empty())
            out.spec.push_back(ds.spec[static_cast<std::size_t>(keep[j])]);
    }
    out.labels = ds.labels;
    return out;
}

}  // namespace ttnc
