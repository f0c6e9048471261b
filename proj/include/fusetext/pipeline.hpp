#pragma once

// End-to-end orchestration used by the CLI: split, topic fitting, training
// and held-out evaluation.

#include <cctype>
#include <string>
#include <vector>

#include "fusetext/checkpoint.hpp"
#include "fusetext/dataset.hpp"
#include "fusetext/lda.hpp"
#include "fusetext/model.hpp"
#include "fusetext/training.hpp"

namespace fusetext {

// Words that feed the topic model: normalized tokens minus bare punctuation.
inline std::vector<std::string> topic_words(const std::string& raw) {
    std::vector<std::string> out;
    for (auto& w : text::normalize_and_tokenize(raw)) {
        const bool punct = w.size() == 1 && std::ispunct(static_cast<unsigned char>(w[0]));
        if (!punct) out.push_back(std::move(w));
    }
    return out;
}

inline lda::LdaModel fit_topics(const std::vector<data::LabeledExample>& examples, const data::LdaConfig& cfg,
                                std::uint64_t seed) {
    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(examples.size());
    for (const auto& e : examples) corpus.push_back(topic_words(e.text));
    return lda::lda_fit(corpus, cfg.params, seed).model;
}

// Fills encoder.vocab_size from the vocab file, or checks it when set.
inline data::RunConfig resolve_for_resources(data::RunConfig cfg, const Resources& res) {
    if (cfg.encoder.vocab_size == 0) {
        cfg.encoder.vocab_size = res.vocab.size();
    } else if (cfg.encoder.vocab_size != res.vocab.size()) {
        throw ValidationError("encoder.vocab_size is " + std::to_string(cfg.encoder.vocab_size) + " but the vocab has " +
                              std::to_string(res.vocab.size()) + " entries");
    }
    cfg.validate();
    return cfg;
}

inline Featurizer make_featurizer(const FusionModel& model, const Resources& res) {
    const auto& cfg = model.config;
    return Featurizer(res, model.lda, cfg.encoder.max_len, cfg.lda.infer_iterations, cfg.train.seed);
}

struct TrainedPipeline {
    FusionModel model;
    training::TrainResult result;
    data::Split split;
};

// Trains on the configured stratified split; history metrics are measured on
// the held-out part.
inline TrainedPipeline train_pipeline(const data::RunConfig& config, const Resources& res,
                                      const std::vector<data::LabeledExample>& examples) {
    TrainedPipeline out;
    out.model.config = resolve_for_resources(config, res);
    const data::RunConfig& cfg = out.model.config;
    out.split = data::split(examples, cfg.train.train_fraction, cfg.train.seed, &cfg.labels);
    out.model.lda = fit_topics(out.split.train, cfg.lda, cfg.train.seed);

    const Featurizer featurize = make_featurizer(out.model, res);
    const auto train_set = training::encode_all(featurize, out.split.train);
    const auto held_out = training::encode_all(featurize, out.split.test);
    const ModelSpec spec = out.model.spec();
    out.result = training::train(cfg.train, spec, init_params(spec, cfg.train.seed), train_set, held_out,
                                 cfg.labels.names);
    out.model.params = out.result.params;
    return out;
}

inline metrics::MetricsReport evaluate_model(const FusionModel& model, const Resources& res,
                                             const std::vector<data::LabeledExample>& examples) {
    return training::evaluate(model.params, model.spec(), training::encode_all(make_featurizer(model, res), examples),
                              model.config.labels.names);
}

}  // namespace fusetext
