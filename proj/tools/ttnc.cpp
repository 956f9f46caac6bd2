#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "ttnc/analysis.hpp"
#include "ttnc/compression.hpp"
#include "ttnc/data.hpp"
#include "ttnc/evaluation.hpp"
#include "ttnc/model.hpp"
#include "ttnc/training.hpp"

using json = nlohmann::json;
using namespace ttnc;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    return j;
}

void reject_unknown(const json& j, const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "'");
    }
}

template <typename T>
void read_key(const json& j, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for key '" + key + "'");
    }
}

void log_config(const std::string& command, const json& resolved) {
    std::cerr << "[" << command << "] resolved config: " << resolved.dump() << "\n";
}

SynthConfig parse_synth(const json& j) {
    reject_unknown(j, {"n_events", "seed", "particles", "derive_jet_charge",
                       "jet_charge_signal", "require_signal"});
    SynthConfig cfg;
    read_key(j, "n_events", cfg.n_events);
    read_key(j, "seed", cfg.seed);
    read_key(j, "derive_jet_charge", cfg.derive_jet_charge);
    read_key(j, "jet_charge_signal", cfg.jet_charge_signal);
    read_key(j, "require_signal", cfg.require_signal);
    if (j.contains("particles")) {
        const json& parts = j.at("particles");
        if (!parts.is_array() || parts.size() > cfg.particles.size())
            throw ConfigError("config: 'particles' must be an array of at most 5 plans");
        for (std::size_t p = 0; p < parts.size(); ++p) {
            reject_unknown(parts[p], {"presence", "q_signal", "pt_signal", "dr_signal"});
            read_key(parts[p], "presence", cfg.particles[p].presence);
            read_key(parts[p], "q_signal", cfg.particles[p].q_signal);
            read_key(parts[p], "pt_signal", cfg.particles[p].pt_signal);
            read_key(parts[p], "dr_signal", cfg.particles[p].dr_signal);
        }
    }
    return cfg;
}

json dump_synth(const SynthConfig& cfg) {
    json parts = json::array();
    for (const auto& p : cfg.particles)
        parts.push_back({{"presence", p.presence},
                         {"q_signal", p.q_signal},
                         {"pt_signal", p.pt_signal},
                         {"dr_signal", p.dr_signal}});
    return {{"n_events", cfg.n_events},
            {"seed", cfg.seed},
            {"particles", parts},
            {"derive_jet_charge", cfg.derive_jet_charge},
            {"jet_charge_signal", cfg.jet_charge_signal},
            {"require_signal", cfg.require_signal}};
}

TrainConfig parse_train(const json& j, Index& chi_init) {
    reject_unknown(j, {"chi_max", "chi_init", "n_sweeps", "loss", "cg_iters_per_node",
                       "cg_tolerance", "batch_size", "weight_decay", "seed",
                       "early_stop_patience", "val_fraction", "threads"});
    TrainConfig cfg;
    read_key(j, "chi_max", cfg.chi_max);
    read_key(j, "n_sweeps", cfg.n_sweeps);
    read_key(j, "cg_iters_per_node", cfg.cg_iters_per_node);
    read_key(j, "cg_tolerance", cfg.cg_tolerance);
    read_key(j, "batch_size", cfg.batch_size);
    read_key(j, "weight_decay", cfg.weight_decay);
    read_key(j, "seed", cfg.seed);
    read_key(j, "early_stop_patience", cfg.early_stop_patience);
    read_key(j, "val_fraction", cfg.val_fraction);
    read_key(j, "threads", cfg.threads);
    if (j.contains("loss")) {
        const std::string kind = j.at("loss").get<std::string>();
        if (kind == "nll")
            cfg.loss = LossKind::nll;
        else if (kind == "mse")
            cfg.loss = LossKind::mse;
        else
            throw ConfigError("config: loss must be 'nll' or 'mse'");
    }
    chi_init = cfg.chi_max;
    read_key(j, "chi_init", chi_init);
    return cfg;
}

json dump_train(const TrainConfig& cfg, Index chi_init) {
    return {{"chi_max", cfg.chi_max},
            {"chi_init", chi_init},
            {"n_sweeps", cfg.n_sweeps},
            {"loss", cfg.loss == LossKind::nll ? "nll" : "mse"},
            {"cg_iters_per_node", cfg.cg_iters_per_node},
            {"cg_tolerance", cfg.cg_tolerance},
            {"batch_size", cfg.batch_size},
            {"weight_decay", cfg.weight_decay},
            {"seed", cfg.seed},
            {"early_stop_patience", cfg.early_stop_patience},
            {"val_fraction", cfg.val_fraction},
            {"threads", cfg.threads}};
}

struct CommonOpts {
    std::string config_path;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool output_required = true) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    auto* out = cmd->add_option("--output,-o", opts.output, "output path");
    if (output_required) out->required();
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--threads", opts.threads, "worker thread count");
}

int run(int argc, char** argv) {
    CLI::App app{"tree tensor network jet classifier"};
    app.require_subcommand(1);

    CommonOpts synth_opts;
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    add_common(synth_cmd, synth_opts);

    CommonOpts train_opts;
    std::string train_data, train_report;
    auto* train_cmd = app.add_subcommand("train", "fit a model on a labeled CSV");
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--data", train_data, "training CSV")->required();
    train_cmd->add_option("--report", train_report, "per-sweep report path");

    CommonOpts predict_opts;
    std::string predict_model, predict_data;
    double predict_delta = 0.0;
    auto* predict_cmd = app.add_subcommand("predict", "write per-sample confidences");
    add_common(predict_cmd, predict_opts);
    predict_cmd->add_option("--model", predict_model, "model file")->required();
    predict_cmd->add_option("--data", predict_data, "input CSV")->required();
    predict_cmd->add_option("--delta", predict_delta, "abstention band");

    CommonOpts analyze_opts;
    std::string analyze_model;
    Index analyze_k = 0;
    auto* analyze_cmd =
        app.add_subcommand("analyze", "entropy, correlation, and feature-ranking report");
    add_common(analyze_cmd, analyze_opts);
    analyze_cmd->add_option("--model", analyze_model, "model file")->required();
    analyze_cmd->add_option("-k", analyze_k, "features to keep (default: half)");

    CommonOpts compress_opts;
    std::string compress_model, compress_data, compress_report;
    Index compress_chi = 0;
    double compress_budget = 0.0, compress_cutoff = 0.0;
    auto* compress_cmd = app.add_subcommand("compress", "truncate bond dimensions");
    add_common(compress_cmd, compress_opts);
    compress_cmd->add_option("--model", compress_model, "model file")->required();
    auto* chi_opt = compress_cmd->add_option("--chi", compress_chi, "uniform target");
    auto* budget_opt =
        compress_cmd->add_option("--budget-us", compress_budget, "latency budget");
    chi_opt->excludes(budget_opt);
    compress_cmd->add_option("--cutoff", compress_cutoff, "relative singular-value floor");
    compress_cmd->add_option("--data", compress_data, "calibration CSV (budget mode)");
    compress_cmd->add_option("--report", compress_report, "compression report path");

    CommonOpts bench_opts;
    std::string bench_model, bench_data;
    Index bench_min = 10000;
    auto* bench_cmd = app.add_subcommand("bench", "single-threaded latency benchmark");
    add_common(bench_cmd, bench_opts);
    bench_cmd->add_option("--model", bench_model, "model file")->required();
    bench_cmd->add_option("--data", bench_data, "calibration CSV")->required();
    bench_cmd->add_option("--min-predictions", bench_min, "minimum classifications");

    CommonOpts eval_opts;
    std::string eval_predictions, eval_data;
    double eval_delta = 0.0;
    bool eval_optimize = false;
    auto* eval_cmd = app.add_subcommand("eval", "tagging power, ROC, and histograms");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--predictions", eval_predictions, "CSV from predict")->required();
    eval_cmd->add_option("--delta", eval_delta, "abstention band");
    eval_cmd->add_flag("--optimize", eval_optimize, "grid-search delta instead");
    eval_cmd->add_option("--data", eval_data, "matching dataset CSV for muon splits");

    app.parse(argc, argv);

    if (synth_cmd->parsed()) {
        json j = load_config(synth_opts.config_path);
        SynthConfig cfg = parse_synth(j);
        if (synth_opts.seed) cfg.seed = *synth_opts.seed;
        log_config("synth", dump_synth(cfg));
        save_csv(synth_generate(cfg), synth_opts.output);
    }

    if (train_cmd->parsed()) {
        json j = load_config(train_opts.config_path);
        Index chi_init = 0;
        TrainConfig cfg = parse_train(j, chi_init);
        if (train_opts.seed) cfg.seed = *train_opts.seed;
        if (train_opts.threads) cfg.threads = *train_opts.threads;
        log_config("train", dump_train(cfg, chi_init));
        Dataset ds = load_csv(train_data);
        ds.spec = fit_feature_spec(ds);
        TtnModel m0 = init_model(TreeTopology::balanced(ds.n_features()), 2, ds.spec,
                                 chi_init, cfg.seed);
        auto [model, report] = train(m0, ds, cfg);
        save_model(model, train_opts.output);
        if (!train_report.empty()) write_train_report(report, train_report);
    }

    if (predict_cmd->parsed()) {
        log_config("predict", {{"model", predict_model},
                               {"data", predict_data},
                               {"delta", predict_delta}});
        TtnModel model = load_model(predict_model);
        Dataset ds = load_csv(predict_data);
        std::ofstream out(predict_opts.output);
        if (!out) throw DataError("predict: cannot open " + predict_opts.output);
        out << "confidence_b,decision,label\n";
        out << std::setprecision(17);
        for (Index i = 0; i < ds.n(); ++i) {
            EncodedSample s = encode(ds.row(i), model.feature_spec());
            PredictionResult p = classify(model, s, predict_delta);
            const char* dec = p.decision == kLabelB     ? "b"
                              : p.decision == kLabelBbar ? "bbar"
                                                         : "abstain";
            out << p.confidences(kLabelB) << ',' << dec << ','
                << (ds.labels[static_cast<std::size_t>(i)] == kLabelB ? "b" : "bbar")
                << '\n';
        }
    }

    if (analyze_cmd->parsed()) {
        TtnModel model = load_model(analyze_model);
        const auto n_features = static_cast<Index>(model.feature_spec().size());
        const Index k = analyze_k > 0 ? analyze_k : std::max<Index>(n_features / 2, 1);
        log_config("analyze", {{"model", analyze_model}, {"k", k}});
        QuipsRanking r = quips(model, k);
        std::vector<std::string> names;
        for (const FeatureDef& f : model.feature_spec()) names.push_back(f.name);
        write_feature_report(r, names, analyze_opts.output);
    }

    if (compress_cmd->parsed()) {
        TtnModel model = load_model(compress_model);
        std::pair<TtnModel, CompressionReport> result = [&] {
            if (budget_opt->count() > 0) {
                if (compress_data.empty())
                    throw ConfigError("compress: budget mode needs --data");
                log_config("compress", {{"model", compress_model},
                                        {"budget_us", compress_budget}});
                Dataset ds = load_csv(compress_data);
                LabeledBatch batch = encode_dataset(ds, model.feature_spec());
                return tune_for_latency(model, compress_budget, batch.samples);
            }
            if (chi_opt->count() == 0)
                throw ConfigError("compress: pass --chi or --budget-us");
            log_config("compress", {{"model", compress_model},
                                    {"chi", compress_chi},
                                    {"cutoff", compress_cutoff}});
            TruncationPlan plan;
            plan.chi_target = compress_chi;
            plan.cutoff = compress_cutoff;
            return truncate(model, plan);
        }();
        save_model(result.first, compress_opts.output);
        if (!compress_report.empty())
            write_compression_report(result.second, compress_report);
    }

    if (bench_cmd->parsed()) {
        log_config("bench", {{"model", bench_model},
                             {"data", bench_data},
                             {"min_predictions", bench_min}});
        TtnModel model = load_model(bench_model);
        Dataset ds = load_csv(bench_data);
        LabeledBatch batch = encode_dataset(ds, model.feature_spec());
        LatencyStats st = measure_latency(model, batch.samples, bench_min);
        std::ofstream out(bench_opts.output);
        if (!out) throw DataError("bench: cannot open " + bench_opts.output);
        out << std::setprecision(8);
        out << "mean_us " << st.mean_us << "\np50_us " << st.p50_us << "\np99_us "
            << st.p99_us << "\nparams " << param_count(model) << '\n';
    }

    if (eval_cmd->parsed()) {
        log_config("eval", {{"predictions", eval_predictions},
                            {"delta", eval_delta},
                            {"optimize", eval_optimize}});
        std::ifstream in(eval_predictions);
        if (!in) throw DataError("eval: cannot open " + eval_predictions);
        std::string line;
        if (!std::getline(in, line) || line.rfind("confidence_b,", 0) != 0)
            throw DataError("eval: predictions file must come from the predict command");
        std::vector<double> conf;
        std::vector<int> truths;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto c1 = line.find(','), c2 = line.rfind(',');
            if (c1 == std::string::npos || c2 <= c1)
                throw DataError("eval: malformed predictions row");
            conf.push_back(std::stod(line.substr(0, c1)));
            const std::string lab = line.substr(c2 + 1);
            if (lab != "b" && lab != "bbar")
                throw DataError("eval: bad truth label '" + lab + "'");
            truths.push_back(lab == "b" ? kLabelB : kLabelBbar);
        }
        Eigen::Map<const Eigen::VectorXd> cv(conf.data(), static_cast<Index>(conf.size()));

        double delta = eval_delta;
        std::string delta_line;
        if (eval_optimize) {
            ThresholdChoice c = optimize_threshold(cv, truths);
            delta = c.delta;
            delta_line = "optimized_delta " + std::to_string(c.delta) + "\n";
        }
        EvalReport r = tagging_power(cv, truths, delta);
        RocCurve roc = roc_auc(cv, truths);
        write_eval_report(r, eval_opts.output);
        {
            std::ofstream out(eval_opts.output, std::ios::app);
            out << std::setprecision(8) << delta_line << "auc " << roc.auc << '\n';
        }
        write_roc(roc, eval_opts.output + ".roc");
        std::vector<bool> has_muon(truths.size(), false);
        if (!eval_data.empty()) {
            Dataset ds = load_csv(eval_data);
            if (ds.n() != static_cast<Index>(truths.size()))
                throw DataError("eval: --data row count does not match predictions");
            has_muon = muon_present(ds);
        }
        write_histogram(confidence_histogram(cv, truths, has_muon),
                        eval_opts.output + ".hist");
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
}
