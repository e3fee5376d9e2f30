// cascademl: batch CLI for the toolkit. Subcommands:
//   split      stratified directory split into train/val/test
//   subsample  miniaturize a directory dataset
//   select     apply a configured feature-selection chain to a CSV
//   nas        PCA-cascade architecture search on a CSV dataset
//   report     confusion matrix (and optional history curves) for a model
//
// Exit codes: 0 success, 1 I/O error, 2 validation/config error,
//             3 no features survive, 4 training divergence.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cascademl/cascademl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNoFeatures = 3;
constexpr int kExitDivergence = 4;

json load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cml::io_error("cannot read config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::parse_error& e) {
        throw cml::validation_error(path + ": invalid JSON: " + e.what());
    }
    if (!cfg.is_object()) throw cml::validation_error(path + ": config must be an object");
    if (!cfg.contains("schema_version") || !cfg["schema_version"].is_number_integer() ||
        cfg["schema_version"].get<int>() != 1)
        throw cml::validation_error(path + ": schema_version must be 1");
    return cfg;
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw cml::validation_error(context + ": unknown key '" + key + "'");
    }
}

cml::ScoreFn score_fn_from_string(const std::string& name) {
    if (name == "f_classif") return cml::ScoreFn::f_classif;
    if (name == "mutual_info") return cml::ScoreFn::mutual_info;
    throw cml::validation_error("unknown score_fn: " + name);
}

cml::SelectorSpec parse_basic_selector(const json& stage, const std::string& context) {
    const std::string kind = stage.at("kind").get<std::string>();
    if (kind == "variance_threshold") {
        check_keys(stage, {"kind", "threshold"}, context);
        return cml::SelectorSpec::variance_threshold(stage.value("threshold", 0.0));
    }
    if (kind == "adaptive_variance") {
        check_keys(stage, {"kind", "percentile"}, context);
        if (!stage.contains("percentile"))
            throw cml::validation_error(context + ": adaptive_variance needs 'percentile'");
        return cml::SelectorSpec::adaptive_variance(stage["percentile"].get<double>());
    }
    if (kind == "select_k_best") {
        check_keys(stage, {"kind", "k", "score_fn", "bins"}, context);
        if (!stage.contains("k"))
            throw cml::validation_error(context + ": select_k_best needs 'k'");
        const auto k = stage["k"].get<std::int64_t>();
        if (k < 1) throw cml::validation_error(context + ": k must be >= 1");
        const auto fn = score_fn_from_string(stage.value("score_fn", "f_classif"));
        const auto bins = stage.value("bins", std::int64_t{10});
        if (bins < 1) throw cml::validation_error(context + ": bins must be >= 1");
        return cml::SelectorSpec::select_k_best(fn, std::size_t(k), std::size_t(bins));
    }
    throw cml::validation_error(context + ": unknown selector kind '" + kind + "'");
}

std::vector<cml::AnySelector> parse_chain(const json& chain) {
    if (!chain.is_array() || chain.empty())
        throw cml::validation_error("select.chain must be a nonempty array");
    std::vector<cml::AnySelector> stages;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const json& stage = chain[i];
        const std::string context = "select.chain[" + std::to_string(i) + "]";
        if (!stage.is_object() || !stage.contains("kind"))
            throw cml::validation_error(context + ": stage needs a 'kind'");
        const std::string kind = stage["kind"].get<std::string>();
        if (kind == "rank_aggregated") {
            check_keys(stage, {"kind", "k", "methods"}, context);
            if (!stage.contains("k") || !stage.contains("methods"))
                throw cml::validation_error(context + ": rank_aggregated needs 'k' and 'methods'");
            const auto k = stage["k"].get<std::int64_t>();
            if (k < 1) throw cml::validation_error(context + ": k must be >= 1");
            cml::RankAggregatedSpec agg;
            agg.k = std::size_t(k);
            for (std::size_t m = 0; m < stage["methods"].size(); ++m)
                agg.methods.push_back(parse_basic_selector(
                    stage["methods"][m], context + ".methods[" + std::to_string(m) + "]"));
            if (agg.methods.empty())
                throw cml::validation_error(context + ": methods must be nonempty");
            stages.emplace_back(std::move(agg));
        } else {
            stages.emplace_back(parse_basic_selector(stage, context));
        }
    }
    return stages;
}

void print_counts(const cml::SplitCounts& counts) {
    for (const auto& [split, per_class] : counts) {
        std::size_t total = 0;
        std::cout << split << ":\n";
        for (const auto& [class_name, n] : per_class) {
            std::cout << "  " << class_name << "\t" << n << "\n";
            total += n;
        }
        std::cout << "  total\t" << total << "\n";
    }
}

// ---------------------------------------------------------------------------
// split

int cmd_split(const std::string& data_dir, const std::string& dest, double train_ratio,
              double val_ratio, double test_ratio, std::uint64_t seed) {
    const cml::SplitPlan plan = cml::plan_split(data_dir, train_ratio, val_ratio,
                                                test_ratio, seed);
    const cml::SplitCounts counts = cml::execute_split(plan, dest);
    print_counts(counts);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// subsample

int cmd_subsample(const std::string& data_dir, const std::string& dest, double fraction,
                  std::uint64_t seed) {
    const cml::SplitCounts counts = cml::subsample(data_dir, dest, fraction, seed);
    print_counts(counts);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// select

int cmd_select(const std::string& in_csv, const std::string& label,
               const std::string& config_path, const std::string& out_csv) {
    const json cfg = load_config(config_path);
    check_keys(cfg, {"schema_version", "select"}, config_path);
    if (!cfg.contains("select") || !cfg["select"].is_object())
        throw cml::validation_error(config_path + ": missing 'select' section");
    check_keys(cfg["select"], {"chain"}, config_path + ": select");
    if (!cfg["select"].contains("chain"))
        throw cml::validation_error(config_path + ": select needs a 'chain'");
    const std::vector<cml::AnySelector> stages = parse_chain(cfg["select"]["chain"]);

    const cml::TabularDataset ds = cml::load_csv(in_csv, label);
    const cml::FeatureSelection sel = cml::fit_pipeline(ds.x, &ds.y, stages);
    const cml::Matrix reduced = cml::transform(sel, ds.x);

    std::vector<std::string> kept_names;
    for (std::size_t idx : sel.selected) kept_names.push_back(ds.feature_names[idx]);
    const cml::TabularDataset out{reduced, ds.y, kept_names, ds.class_names, ds.label_name};
    cml::save_csv(out, out_csv);

    std::cout << "selected " << sel.selected.size() << " of " << sel.input_dim
              << " features:\n";
    for (std::size_t idx : sel.selected)
        std::cout << "  [" << idx << "] " << ds.feature_names[idx] << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// nas

struct NasOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> layers;
    std::optional<std::size_t> epochs;
};

cml::SearchConfig parse_nas_config(const json& cfg, const std::string& path,
                                   const NasOverrides& overrides, double& val_fraction) {
    check_keys(cfg, {"schema_version", "nas"}, path);
    if (!cfg.contains("nas") || !cfg["nas"].is_object())
        throw cml::validation_error(path + ": missing 'nas' section");
    const json& nas = cfg["nas"];
    check_keys(nas,
               {"layers", "pca_variance", "normalize", "unit", "activation", "dropout", "l2",
                "batch_norm", "init", "output_neurons", "out_activation", "val_fraction",
                "seed", "train"},
               path + ": nas");

    cml::SearchConfig search;
    search.layers = overrides.layers.value_or(nas.value("layers", std::int64_t{1}));
    if (nas.contains("pca_variance")) {
        if (nas["pca_variance"].is_array())
            search.pca_variance = nas["pca_variance"].get<std::vector<double>>();
        else
            search.pca_variance = {nas["pca_variance"].get<double>()};
    }
    search.hidden.activation = cml::activation_from_string(nas.value("activation", "relu"));
    search.hidden.dropout_rate = nas.value("dropout", 0.0);
    search.hidden.l2 = nas.value("l2", 0.0);
    search.hidden.batch_norm = nas.value("batch_norm", false);
    search.hidden.init = cml::init_from_string(nas.value("init", "he_normal"));
    const auto output_neurons = nas.value("output_neurons", std::int64_t{1});
    if (output_neurons < 1)
        throw cml::validation_error(path + ": output_neurons must be >= 1");
    search.output_neurons = std::size_t(output_neurons);
    search.out_activation = cml::activation_from_string(nas.value("out_activation", "sigmoid"));
    val_fraction = nas.value("val_fraction", 0.2);

    if (nas.contains("train")) {
        const json& train = nas["train"];
        check_keys(train,
                   {"epochs", "batch_size", "loss", "optimizer", "learn_rate", "stop_criteria",
                    "es_mode", "es_patience", "metrics", "verbose"},
                   path + ": nas.train");
        search.train.epochs = std::size_t(train.value("epochs", std::int64_t{10}));
        search.train.batch_size = std::size_t(train.value("batch_size", std::int64_t{32}));
        search.train.loss = cml::loss_from_string(train.value("loss", "binary_crossentropy"));
        search.train.optimizer = cml::optimizer_from_string(train.value("optimizer", "adam"));
        search.train.learn_rate = train.value("learn_rate", 0.001);
        search.train.stop_criteria = train.value("stop_criteria", "val_loss");
        search.train.es_mode = cml::es_mode_from_string(train.value("es_mode", "min"));
        search.train.es_patience = std::size_t(train.value("es_patience", std::int64_t{5}));
        if (train.contains("metrics"))
            search.train.metrics = train["metrics"].get<std::vector<std::string>>();
        search.train.verbose = int(train.value("verbose", std::int64_t{0}));
    }
    if (overrides.epochs) search.train.epochs = *overrides.epochs;

    if (overrides.seed)
        search.train.seed = *overrides.seed;
    else if (nas.contains("seed"))
        search.train.seed = nas["seed"].get<std::uint64_t>();
    else
        throw cml::validation_error(path + ": nas needs a 'seed' (or pass --seed)");
    return search;
}

cml::Matrix targets_for(const std::vector<int>& y, std::size_t n_classes,
                        std::size_t output_neurons) {
    if (output_neurons == 1) {
        if (n_classes != 2)
            throw cml::validation_error("a single output unit needs exactly 2 classes, got " +
                                        std::to_string(n_classes));
        return cml::binary_targets(y);
    }
    if (n_classes != output_neurons)
        throw cml::validation_error("output_neurons (" + std::to_string(output_neurons) +
                                    ") must equal the class count (" +
                                    std::to_string(n_classes) + ")");
    return cml::one_hot(y, n_classes);
}

int cmd_nas(const std::string& train_csv, const std::string& label,
            const std::string& config_path, const std::string& out_model,
            const std::string& report_dir, const NasOverrides& overrides) {
    const json cfg = load_config(config_path);
    double val_fraction = 0.2;
    const cml::SearchConfig search = parse_nas_config(cfg, config_path, overrides, val_fraction);
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw cml::validation_error(config_path + ": val_fraction must be in (0,1)");

    const cml::TabularDataset ds = cml::load_csv(train_csv, label);
    const auto [train_ds, val_ds] = cml::stratified_split(ds, val_fraction, search.train.seed);
    const cml::Matrix y_train = targets_for(train_ds.y, ds.n_classes(), search.output_neurons);
    const cml::Matrix y_val = targets_for(val_ds.y, ds.n_classes(), search.output_neurons);

    const json& nas = cfg["nas"];
    const bool normalize = nas.value("normalize", true);
    const bool unit = nas.value("unit", true);
    const cml::PreparedData data =
        cml::data_init(train_ds.x, y_train, val_ds.x, y_val, normalize, unit);

    const cml::SearchResult result = cml::build(search, data);

    fs::create_directories(report_dir);
    // exported models take raw features: bake the scaler into layer 1 and
    // record the label mapping this model was trained with
    cml::DenseNetwork export_model = result.model;
    cml::fold_scaler_into_input_layer(export_model, data.scaler);
    cml::save_network(export_model, out_model, ds.class_names);
    cml::write_text_file(cml::widths_table(result), (fs::path(report_dir) / "widths.tsv").string());
    cml::write_text_file(cml::variance_curves_table(result),
                         (fs::path(report_dir) / "variance_curves.tsv").string());
    for (std::size_t s = 0; s < result.per_stage.size(); ++s) {
        const cml::TrainingHistory& h = result.per_stage[s].history;
        if (h.epochs() == 0) continue; // stage 1 has no training
        const std::string base = "stage" + std::to_string(s + 1) + "_history";
        cml::save_history(h, (fs::path(report_dir) / (base + ".tsv")).string());
        cml::PlotSpec plot;
        plot.title = "Stage " + std::to_string(s + 1) + " training";
        plot.user_metric = std::find(search.train.metrics.begin(), search.train.metrics.end(),
                                     "accuracy") != search.train.metrics.end()
                               ? "accuracy"
                               : "";
        cml::write_text_file(cml::render_history(h, plot),
                             (fs::path(report_dir) / (base + ".svg")).string());
    }
    cml::save_history(result.final_history,
                      (fs::path(report_dir) / "final_history.tsv").string());
    cml::PlotSpec final_plot;
    final_plot.title = "Final training";
    final_plot.user_metric = std::find(search.train.metrics.begin(), search.train.metrics.end(),
                                       "accuracy") != search.train.metrics.end()
                                 ? "accuracy"
                                 : "";
    cml::write_text_file(cml::render_history(result.final_history, final_plot),
                         (fs::path(report_dir) / "final_history.svg").string());

    std::cout << "chosen layer widths:";
    for (std::size_t w : result.widths) std::cout << " " << w;
    std::cout << "\nmodel written to " << out_model << "\nreports in " << report_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::string& model_path, const std::string& data_csv,
               const std::string& label, const std::string& out_dir,
               const std::string& history_path) {
    const cml::LoadedModel model = cml::load_model(model_path);
    const cml::DenseNetwork& net = model.net;
    const cml::TabularDataset ds = cml::load_csv(data_csv, label);
    if (ds.x.cols() != net.input_dim())
        throw cml::validation_error("data width (" + std::to_string(ds.x.cols()) +
                                    ") does not match model input (" +
                                    std::to_string(net.input_dim()) + ")");
    const cml::Task task = net.output_dim() == 1 ? cml::Task::binary : cml::Task::categorical;

    // Use the model's recorded label mapping when it has one; the data file's
    // own first-appearance order decides otherwise.
    std::vector<std::string> class_names = model.class_names;
    std::vector<int> truth = ds.y;
    if (!class_names.empty()) {
        std::vector<int> remap(ds.n_classes(), -1);
        for (std::size_t c = 0; c < ds.n_classes(); ++c) {
            const auto it =
                std::find(class_names.begin(), class_names.end(), ds.class_names[c]);
            if (it == class_names.end())
                throw cml::validation_error("class '" + ds.class_names[c] +
                                            "' is unknown to the model");
            remap[c] = int(it - class_names.begin());
        }
        for (int& label_id : truth) label_id = remap[std::size_t(label_id)];
    } else {
        class_names = ds.class_names;
    }
    const std::size_t n_classes = class_names.size();
    if (task == cml::Task::binary && n_classes != 2)
        throw cml::validation_error("binary model needs a 2-class dataset");
    if (task == cml::Task::categorical && n_classes != net.output_dim())
        throw cml::validation_error("model output width does not match class count");

    const std::vector<int> predicted = cml::predict_classes(net, ds.x, task);
    const cml::ConfusionMatrix cm = cml::confusion_matrix(truth, predicted, class_names);

    fs::create_directories(out_dir);
    const std::string table = cml::confusion_text_table(cm);
    cml::write_text_file(table, (fs::path(out_dir) / "confusion.txt").string());
    cml::write_text_file(cml::render_confusion(cm),
                         (fs::path(out_dir) / "confusion.svg").string());
    std::cout << table;
    std::cout << "accuracy: " << cml::format_double(cm.accuracy()) << "\n";

    if (!history_path.empty()) {
        const cml::TrainingHistory history = cml::load_history(history_path);
        cml::PlotSpec plot;
        plot.user_metric = history.has("accuracy") ? "accuracy" : "";
        cml::write_text_file(cml::render_history(history, plot),
                             (fs::path(out_dir) / "history.svg").string());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascademl: PCA-cascade network sizing, feature selection, dataset tools"};
    app.require_subcommand(1);

    // split
    auto* split = app.add_subcommand("split", "Stratified directory split into train/val/test");
    std::string split_data, split_dest;
    double split_train = 0.7, split_val = 0.15, split_test = 0.15;
    std::uint64_t split_seed = 0;
    split->add_option("--data-dir", split_data, "Source dataset directory (class subdirs)")
        ->required();
    split->add_option("--dest", split_dest, "Destination directory (must be empty or absent)")
        ->required();
    split->add_option("--train", split_train, "Train ratio")->capture_default_str();
    split->add_option("--val", split_val, "Validation ratio")->capture_default_str();
    split->add_option("--test", split_test, "Test ratio")->capture_default_str();
    split->add_option("--seed", split_seed, "Shuffle seed")->required();

    // subsample
    auto* sub = app.add_subcommand("subsample", "Copy a per-class fraction of a dataset");
    std::string sub_data, sub_dest;
    double sub_fraction = 0.5;
    std::uint64_t sub_seed = 0;
    sub->add_option("--data-dir", sub_data, "Source dataset directory (class subdirs)")
        ->required();
    sub->add_option("--dest", sub_dest, "Destination directory (must be empty or absent)")
        ->required();
    sub->add_option("--fraction", sub_fraction, "Fraction of files to keep per class, (0,1]")
        ->capture_default_str();
    sub->add_option("--seed", sub_seed, "Shuffle seed")->required();

    // select
    auto* select = app.add_subcommand("select", "Apply a feature-selection chain to a CSV");
    std::string sel_in, sel_label, sel_config, sel_out;
    select->add_option("--in", sel_in, "Input CSV")->required();
    select->add_option("--label", sel_label, "Label column name")->required();
    select->add_option("--config", sel_config, "JSON config with a select.chain")->required();
    select->add_option("--out", sel_out, "Output CSV")->required();

    // nas
    auto* nas = app.add_subcommand("nas", "PCA-cascade architecture search");
    std::string nas_train, nas_label, nas_config, nas_model, nas_report;
    NasOverrides overrides;
    std::uint64_t nas_seed = 0;
    std::size_t nas_layers = 0, nas_epochs = 0;
    nas->add_option("--train", nas_train, "Training CSV")->required();
    nas->add_option("--label", nas_label, "Label column name")->required();
    nas->add_option("--config", nas_config, "JSON config with a nas section")->required();
    nas->add_option("--out-model", nas_model, "Path for the .cmnet model")->required();
    nas->add_option("--report-dir", nas_report, "Directory for widths/curves/history reports")
        ->required();
    auto* seed_opt = nas->add_option("--seed", nas_seed, "Override config seed");
    auto* layers_opt = nas->add_option("--layers", nas_layers, "Override config layer count");
    auto* epochs_opt = nas->add_option("--epochs", nas_epochs, "Override config epochs");

    // report
    auto* report = app.add_subcommand("report", "Confusion matrix / history plots for a model");
    std::string rep_model, rep_data, rep_label, rep_out, rep_history;
    report->add_option("--model", rep_model, "Path to a .cmnet model")->required();
    report->add_option("--data", rep_data, "Evaluation CSV")->required();
    report->add_option("--label", rep_label, "Label column name")->required();
    report->add_option("--out-dir", rep_out, "Output directory")->required();
    report->add_option("--history", rep_history, "Optional history TSV to render");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (split->parsed())
            return cmd_split(split_data, split_dest, split_train, split_val, split_test,
                             split_seed);
        if (sub->parsed()) return cmd_subsample(sub_data, sub_dest, sub_fraction, sub_seed);
        if (select->parsed()) return cmd_select(sel_in, sel_label, sel_config, sel_out);
        if (nas->parsed()) {
            if (!seed_opt->empty()) overrides.seed = nas_seed;
            if (!layers_opt->empty()) overrides.layers = nas_layers;
            if (!epochs_opt->empty()) overrides.epochs = nas_epochs;
            return cmd_nas(nas_train, nas_label, nas_config, nas_model, nas_report, overrides);
        }
        if (report->parsed())
            return cmd_report(rep_model, rep_data, rep_label, rep_out, rep_history);
    } catch (const cml::no_features_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoFeatures;
    } catch (const cml::divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const cml::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const cml::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitValidation;
}
