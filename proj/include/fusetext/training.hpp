#pragma once

// Mini-batch training of the fusion model on the weighted two-task loss,
// with epoch-wise loss re-balancing and a per-epoch metric history.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fusetext/dataset.hpp"
#include "fusetext/losses.hpp"
#include "fusetext/metrics.hpp"
#include "fusetext/model.hpp"
#include "fusetext/optim.hpp"
#include "fusetext/random.hpp"

namespace fusetext::training {

struct EncodedExample {
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> segment_ids;
    Tensor aux_row;
    std::size_t class_label = 0;
    int binary_label = 0;
};

inline EncodedExample encode_example(const Featurizer& featurize, const data::LabeledExample& ex) {
    FeaturizedText f = featurize(ex.text);
    return {std::move(f.token_ids), std::move(f.segment_ids), std::move(f.aux_row), ex.class_label, ex.binary_label};
}

inline std::vector<EncodedExample> encode_all(const Featurizer& featurize,
                                              const std::vector<data::LabeledExample>& examples) {
    std::vector<EncodedExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(encode_example(featurize, ex));
    return out;
}

struct HistoryRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

using MetricHistory = std::vector<HistoryRow>;

inline constexpr const char* kHistoryHeader = "epoch,train_loss,lambda1,lambda2,accuracy,precision,recall,f1";

inline void write_history(std::ostream& out, const MetricHistory& history) {
    out << kHistoryHeader << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_loss << ',' << r.lambda1 << ',' << r.lambda2 << ',' << r.accuracy << ','
            << r.precision << ',' << r.recall << ',' << r.f1 << '\n';
    }
}

struct EpochTaskLoss {
    double ce = 0.0;   // mean weighted cross-entropy over the epoch's examples
    double bce = 0.0;  // mean binary cross-entropy over the epoch's examples
};

struct TrainResult {
    ParamStore params;
    MetricHistory history;
    std::vector<EpochTaskLoss> task_losses;
};

inline std::vector<std::size_t> predict_classes(const ParamStore& params, const ModelSpec& spec,
                                                const std::vector<EncodedExample>& examples) {
    std::vector<std::size_t> preds;
    preds.reserve(examples.size());
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < examples.size(); start += kChunk) {
        Tape tape;
        const std::size_t end = std::min(examples.size(), start + kChunk);
        for (std::size_t i = start; i < end; ++i) {
            const auto& ex = examples[i];
            auto f = forward(tape, params, spec, ex.token_ids, ex.segment_ids, ex.aux_row);
            preds.push_back(heads::predict_class(f.y_final.value().data()));
        }
    }
    return preds;
}

inline metrics::MetricsReport evaluate(const ParamStore& params, const ModelSpec& spec,
                                       const std::vector<EncodedExample>& examples,
                                       const std::vector<std::string>& class_names) {
    const auto preds = predict_classes(params, spec, examples);
    std::vector<std::size_t> gold;
    gold.reserve(examples.size());
    for (const auto& ex : examples) gold.push_back(ex.class_label);
    return metrics::build_report(preds, gold, class_names);
}

struct BatchLoss {
    Var total;
    Var ce_sum;
    Var bce_sum;
};

// Batch objective: lambda1 * mean CE(y_final) + lambda2 * mean BCE(y_binary).
inline BatchLoss batch_loss(Tape& tape, const ParamStore& params, const ModelSpec& spec,
                            const std::vector<const EncodedExample*>& batch, const losses::LossWeights& weights,
                            const std::vector<double>& class_weights) {
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    Var ce_sum, bce_sum;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const EncodedExample& ex = *batch[i];
        auto f = forward(tape, params, spec, ex.token_ids, ex.segment_ids, ex.aux_row);
        const double cw = class_weights.empty() ? 1.0 : class_weights.at(ex.class_label);
        Var ce = losses::ce_loss(f.y_final, ex.class_label, cw);
        Var bce = losses::bce_term(f.y_binary, static_cast<double>(ex.binary_label));
        ce_sum = i == 0 ? ce : ad::add(ce_sum, ce);
        bce_sum = i == 0 ? bce : ad::add(bce_sum, bce);
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    Var total = losses::combined_loss(ad::scale(ce_sum, inv_n), ad::scale(bce_sum, inv_n), weights);
    return {total, ce_sum, bce_sum};
}

// `validation` feeds the history metrics; when empty the training set is used.
inline TrainResult train(const data::TrainConfig& config, const ModelSpec& spec, ParamStore params,
                         const std::vector<EncodedExample>& train_set, const std::vector<EncodedExample>& validation,
                         const std::vector<std::string>& class_names) {
    config.validate();
    if (train_set.empty()) throw ValidationError("training set is empty");
    bool has_pos = false, has_neg = false;
    for (const auto& ex : train_set) (ex.binary_label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw ValidationError("training split needs both harmful and non-harmful examples");

    std::vector<double> class_weights;
    if (config.class_weights_enabled) {
        std::vector<std::size_t> labels;
        for (const auto& ex : train_set) labels.push_back(ex.class_label);
        class_weights = losses::inverse_frequency_weights(labels, spec.classes());
    }

    TrainResult result;
    optim::AdamState adam;
    losses::LossWeights weights = config.initial_weights;
    Rng rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto& eval_set = validation.empty() ? train_set : validation;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(order, rng);
        double loss_sum = 0.0, ce_sum = 0.0, bce_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<const EncodedExample*> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);

            Tape tape;
            BatchLoss loss = batch_loss(tape, params, spec, batch, weights, class_weights);
            const double value = loss.total.value().item();
            if (!std::isfinite(value)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            }
            loss_sum += value * static_cast<double>(batch.size());
            ce_sum += loss.ce_sum.value().item();
            bce_sum += loss.bce_sum.value().item();
            optim::adam_step(params, tape.backward(loss.total), adam, config.learning_rate);
        }
        const double n = static_cast<double>(train_set.size());
        const metrics::MetricsReport report = evaluate(params, spec, eval_set, class_names);
        result.history.push_back({epoch, loss_sum / n, weights.lambda1, weights.lambda2, report.accuracy,
                                  report.macro_precision, report.macro_recall, report.macro_f1});
        result.task_losses.push_back({ce_sum / n, bce_sum / n});
        if (config.balancing_enabled) weights = losses::update_loss_weights(ce_sum / n, bce_sum / n);
    }
    result.params = std::move(params);
    return result;
}

}  // namespace fusetext::training
