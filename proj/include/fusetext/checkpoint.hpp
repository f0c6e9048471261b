#pragma once

// JSON checkpoint: resolved config, label set, fitted LDA and every parameter
// tensor as shape + row-major values. Doubles are written in shortest
// round-trip form, so save/load is bit-exact.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fusetext/dataset.hpp"
#include "fusetext/errors.hpp"
#include "fusetext/lda.hpp"
#include "fusetext/model.hpp"

namespace fusetext {

inline constexpr int kCheckpointFormatVersion = 1;

struct FusionModel {
    data::RunConfig config;
    ParamStore params;
    lda::LdaModel lda;

    ModelSpec spec() const { return make_spec(config); }
};

namespace ckpt_detail {

using json = nlohmann::json;

inline json tensor_to_json(const Tensor& t) {
    return {{"shape", {t.rows(), t.cols()}}, {"data", t.values()}};
}

inline Tensor tensor_from_json(const json& j, const std::string& name) {
    try {
        const auto shape = j.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) throw CheckpointError("tensor '" + name + "' must have a 2-element shape");
        auto data = j.at("data").get<std::vector<double>>();
        if (data.size() != shape[0] * shape[1])
            throw CheckpointError("tensor '" + name + "' has " + std::to_string(data.size()) + " values for shape " +
                                  shape_string({shape[0], shape[1]}));
        return Tensor(shape[0], shape[1], std::move(data));
    } catch (const json::exception& e) {
        throw CheckpointError("tensor '" + name + "' is malformed: " + e.what());
    }
}

inline json lda_to_json(const lda::LdaModel& m) {
    return {{"topics", m.topics}, {"alpha", m.alpha}, {"beta", m.beta}, {"words", m.words},
            {"phi", tensor_to_json(m.phi)}};
}

inline lda::LdaModel lda_from_json(const json& j) {
    lda::LdaModel m;
    try {
        m.topics = j.at("topics").get<std::size_t>();
        m.alpha = j.at("alpha").get<double>();
        m.beta = j.at("beta").get<double>();
        m.words = j.at("words").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("lda section is malformed: ") + e.what());
    }
    m.phi = tensor_from_json(j.at("phi"), "lda.phi");
    if (m.phi.rows() != m.topics || m.phi.cols() != m.words.size())
        throw CheckpointError("lda.phi shape does not match topics x vocabulary");
    for (std::size_t i = 0; i < m.words.size(); ++i)
        if (!m.vocab.emplace(m.words[i], i).second) throw CheckpointError("lda vocabulary repeats '" + m.words[i] + "'");
    return m;
}

}  // namespace ckpt_detail

inline nlohmann::json checkpoint_to_json(const FusionModel& model) {
    nlohmann::json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["config"] = data::config_to_json(model.config);
    j["label_set"] = model.config.labels.names;
    j["harmful_mask"] = model.config.labels.harmful;
    j["lda"] = ckpt_detail::lda_to_json(model.lda);
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, t] : model.params) tensors[name] = ckpt_detail::tensor_to_json(t);
    j["tensors"] = std::move(tensors);
    return j;
}

inline FusionModel checkpoint_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw CheckpointError("checkpoint is not a JSON object");
    auto version = j.find("format_version");
    if (version == j.end() || !version->is_number_integer())
        throw CheckpointError("checkpoint has no integer format_version");
    if (version->get<long long>() != kCheckpointFormatVersion)
        throw CheckpointError("unsupported checkpoint format_version " + std::to_string(version->get<long long>()) +
                              " (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    for (const char* key : {"config", "label_set", "harmful_mask", "lda", "tensors"})
        if (!j.contains(key)) throw CheckpointError(std::string("checkpoint is missing '") + key + "'");

    FusionModel model;
    try {
        model.config = data::config_from_json(j.at("config"));
    } catch (const ValidationError& e) {
        throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
    }
    try {
        if (j.at("label_set").get<std::vector<std::string>>() != model.config.labels.names ||
            j.at("harmful_mask").get<std::vector<bool>>() != model.config.labels.harmful)
            throw CheckpointError("checkpoint label_set/harmful_mask disagree with its config");
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint label_set is malformed: ") + e.what());
    }
    model.lda = ckpt_detail::lda_from_json(j.at("lda"));
    if (model.lda.topics != model.config.lda.params.topics)
        throw CheckpointError("checkpoint lda topic count disagrees with its config");

    const auto& tensors = j.at("tensors");
    if (!tensors.is_object()) throw CheckpointError("checkpoint 'tensors' must be an object");
    const auto shapes = expected_shapes(model.spec());
    for (const auto& [name, shape] : shapes) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'");
        Tensor t = ckpt_detail::tensor_from_json(*it, name);
        if (t.shape() != shape)
            throw CheckpointError("tensor '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                                  shape_string(shape));
        model.params.emplace(name, std::move(t));
    }
    for (const auto& [name, value] : tensors.items())
        if (!shapes.contains(name)) throw CheckpointError("checkpoint has unexpected tensor '" + name + "'");
    return model;
}

// Writes to a sibling temp file and renames it into place.
inline void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const FusionModel& model, const std::filesystem::path& path) {
    write_file_atomically(path, checkpoint_to_json(model).dump() + "\n");
}

inline FusionModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace fusetext
