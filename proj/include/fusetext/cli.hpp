#pragma once

// `fusetext` command line: train, evaluate, predict.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation/checkpoint error,
// 3 runtime failure. Diagnostics go to the error stream.

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusetext/baseline.hpp"
#include "fusetext/checkpoint.hpp"
#include "fusetext/pipeline.hpp"

namespace fusetext::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kRuntimeError = 3 };

inline constexpr const char* kCheckpointFile = "model.ckpt.json";
inline constexpr const char* kHistoryFile = "history.csv";

namespace detail {

inline std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

struct Row {
    std::string model;
    metrics::MetricsReport report;
};

inline void print_summary(std::ostream& out, const std::vector<Row>& rows) {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.model.size());
    out << std::left << std::setw(static_cast<int>(width)) << "model" << std::right;
    for (const char* h : {"accuracy", "precision", "recall", "f1"}) out << "  " << std::setw(9) << h;
    out << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.model << std::right;
        for (double v : {r.report.accuracy, r.report.macro_precision, r.report.macro_recall, r.report.macro_f1})
            out << "  " << std::setw(9) << fixed(v);
        out << '\n';
    }
}

inline void print_per_class(std::ostream& out, const Row& row) {
    std::size_t width = 5;
    for (const auto& c : row.report.per_class) width = std::max(width, c.name.size());
    out << "\nper-class (" << row.model << ")\n";
    out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << "  " << std::setw(7)
        << "support";
    for (const char* h : {"precision", "recall", "f1"}) out << "  " << std::setw(9) << h;
    out << '\n';
    for (const auto& c : row.report.per_class) {
        out << std::left << std::setw(static_cast<int>(width)) << c.name << std::right << "  " << std::setw(7)
            << c.support;
        for (double v : {c.precision, c.recall, c.f1}) out << "  " << std::setw(9) << fixed(v);
        if (c.undefined) out << "  (undefined)";
        out << '\n';
    }
}

inline nlohmann::json report_json(const metrics::MetricsReport& r) {
    nlohmann::json j{{"accuracy", r.accuracy}, {"precision", r.macro_precision}, {"recall", r.macro_recall},
                     {"f1", r.macro_f1}};
    nlohmann::json per = nlohmann::json::array();
    for (const auto& c : r.per_class) {
        per.push_back({{"class", c.name}, {"support", c.support}, {"precision", c.precision}, {"recall", c.recall},
                       {"f1", c.f1}, {"undefined", c.undefined}});
    }
    j["per_class"] = std::move(per);
    return j;
}

inline std::vector<data::LabeledExample> load_split_test(const FusionModel& model, const std::string& data_path,
                                                         data::Split* split_out) {
    const auto examples = data::load_dataset(data_path, model.config.labels);
    data::Split s = data::split(examples, model.config.train.train_fraction, model.config.train.seed,
                                &model.config.labels);
    if (s.test.empty()) throw ValidationError("held-out split of " + data_path + " is empty");
    *split_out = std::move(s);
    return split_out->test;
}

}  // namespace detail

inline int cmd_train(const std::string& config_path, const std::string& data_path, const std::string& out_dir,
                     std::ostream& out) {
    data::RunConfig cfg = data::load_config(config_path);
    data::apply_seed_override(cfg);
    cfg.paths.dataset = std::filesystem::absolute(data_path).lexically_normal().string();
    const auto examples = data::load_dataset(data_path, cfg.labels);
    const Resources res = load_resources(cfg.paths, cfg.glove_dim);
    const TrainedPipeline run = train_pipeline(cfg, res, examples);

    std::filesystem::create_directories(out_dir);
    std::ostringstream history;
    training::write_history(history, run.result.history);
    save_checkpoint(run.model, std::filesystem::path(out_dir) / kCheckpointFile);
    write_file_atomically(std::filesystem::path(out_dir) / kHistoryFile, history.str());

    const auto& last = run.result.history.back();
    out << "epochs " << last.epoch << "  train_loss " << detail::fixed(last.train_loss, 6) << "  lambda "
        << detail::fixed(last.lambda1) << '/' << detail::fixed(last.lambda2) << '\n';
    out << "held-out accuracy " << detail::fixed(last.accuracy) << "  precision " << detail::fixed(last.precision)
        << "  recall " << detail::fixed(last.recall) << "  f1 " << detail::fixed(last.f1) << '\n';
    out << "wrote " << (std::filesystem::path(out_dir) / kCheckpointFile).string() << '\n';
    out << "wrote " << (std::filesystem::path(out_dir) / kHistoryFile).string() << '\n';
    return kOk;
}

// Evaluates on the held-out split obtained by re-splitting `data_path` with
// the checkpoint's train_fraction and seed. The baseline trains on the
// matching training split.
inline int cmd_evaluate(const std::string& model_path, const std::string& data_path, bool with_baseline,
                        bool as_json, std::ostream& out) {
    const FusionModel model = load_checkpoint(model_path);
    data::Split split;
    const auto test = detail::load_split_test(model, data_path, &split);
    const Resources res = load_resources(model.config.paths, model.config.glove_dim);

    std::vector<detail::Row> rows{{"fusion", evaluate_model(model, res, test)}};
    if (with_baseline)
        rows.push_back({"tfidf_lr", baseline::tfidf_lr_baseline(split.train, test, model.config.labels.names,
                                                                model.config.train.seed)});

    if (as_json) {
        nlohmann::json j = detail::report_json(rows[0].report);
        j["model"] = rows[0].model;
        j["examples"] = test.size();
        if (with_baseline) {
            j["baseline"] = detail::report_json(rows[1].report);
            j["baseline"]["model"] = rows[1].model;
        }
        out << j.dump(2) << '\n';
        return kOk;
    }
    out << "held-out examples: " << test.size() << "\n\n";
    detail::print_summary(out, rows);
    for (const auto& r : rows) detail::print_per_class(out, r);
    return kOk;
}

inline int cmd_predict(const std::string& model_path, const std::string& text, std::ostream& out) {
    const FusionModel model = load_checkpoint(model_path);
    if (text::normalize_and_tokenize(text).empty()) throw ValidationError("text is empty after normalization");
    const Resources res = load_resources(model.config.paths, model.config.glove_dim);
    const Featurizer featurize = make_featurizer(model, res);
    const heads::Prediction p = predict(model.params, model.spec(), featurize(text));
    const auto& names = model.config.labels.names;

    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "predicted_class: " << names.at(p.predicted_class) << '\n';
    out << "y_binary: " << p.y_binary << '\n';
    for (std::size_t c = 0; c < names.size(); ++c) out << "y_final[" << names[c] << "]: " << p.y_final[c] << '\n';
    return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fusion text classifier: train, evaluate and predict.", "fusetext"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir, model_path, text;
    bool with_baseline = false, as_json = false;

    auto* train = app.add_subcommand("train", "Fit topics and train the fusion model");
    train->add_option("--config", config_path, "Run configuration (JSON)")->required();
    train->add_option("--data", data_path, "Labeled CSV (tweet_text,cyberbullying_type)")->required();
    train->add_option("--out", out_dir, "Output directory for model.ckpt.json and history.csv")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the held-out split");
    evaluate->add_option("--model", model_path, "Checkpoint file")->required();
    evaluate->add_option("--data", data_path, "Labeled CSV")->required();
    evaluate->add_flag("--baseline", with_baseline, "Also train and score the TF-IDF logistic regression");
    evaluate->add_flag("--json", as_json, "Print the report as JSON");

    auto* predict_cmd = app.add_subcommand("predict", "Classify one text");
    predict_cmd->add_option("--model", model_path, "Checkpoint file")->required();
    predict_cmd->add_option("--text", text, "Input text")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kUsage;
    }

    try {
        if (*train) return cmd_train(config_path, data_path, out_dir, out);
        if (*evaluate) return cmd_evaluate(model_path, data_path, with_baseline, as_json, out);
        return cmd_predict(model_path, text, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "runtime failure: " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace fusetext::cli
