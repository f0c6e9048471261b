#pragma once

// Tweet-level auxiliary features: lexicon sentiment, LDA topic mixture and
// the mean GloVe vector, concatenated in that order.

#include <array>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fusetext/errors.hpp"
#include "fusetext/tensor.hpp"
#include "fusetext/text.hpp"

namespace fusetext::aux {

inline constexpr std::size_t kSentimentDim = 4;

class SentimentLexicon {
public:
    SentimentLexicon() = default;

    void insert(const std::string& word, int polarity) {
        if (polarity != 1 && polarity != -1) throw ValidationError("lexicon polarity must be +1 or -1");
        polarity_.insert_or_assign(word, polarity);
    }
    // +1, -1, or 0 when absent.
    int polarity(const std::string& word) const {
        auto it = polarity_.find(word);
        return it == polarity_.end() ? 0 : it->second;
    }
    std::size_t size() const { return polarity_.size(); }
    bool empty() const { return polarity_.empty(); }

private:
    std::unordered_map<std::string, int> polarity_;
};

// `word<TAB>+1` or `word<TAB>-1` per line. Words are lowercased to match
// normalized tweets.
inline SentimentLexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open lexicon file " + path.string());
    SentimentLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (tab == std::string::npos || tab == 0) throw ParseError(where + ": expected word<TAB>+1|-1");
        const std::string label = line.substr(tab + 1);
        int pol = 0;
        if (label == "+1" || label == "1") pol = 1;
        else if (label == "-1") pol = -1;
        else throw ParseError(where + ": polarity must be +1 or -1, got '" + label + "'");
        lex.insert(text::detail::lower(line.substr(0, tab)), pol);
    }
    return lex;
}

// (polarity score, positive fraction, negative fraction, neutral fraction).
inline std::array<double, kSentimentDim> sentiment_features(const std::vector<std::string>& words,
                                                            const SentimentLexicon& lexicon) {
    if (words.empty()) return {0.0, 0.0, 0.0, 1.0};
    std::size_t pos = 0, neg = 0;
    for (const auto& w : words) {
        const int p = lexicon.polarity(w);
        pos += p > 0;
        neg += p < 0;
    }
    const double n = static_cast<double>(words.size());
    const std::size_t neutral = words.size() - pos - neg;
    return {(static_cast<double>(pos) - static_cast<double>(neg)) / n, static_cast<double>(pos) / n,
            static_cast<double>(neg) / n, static_cast<double>(neutral) / n};
}

// Column mean of the GloVe rows for `words` (OOV rows count as zeros).
inline std::vector<double> glove_mean(const std::vector<std::string>& words, const text::GloveTable& table) {
    std::vector<double> mean(table.dimension(), 0.0);
    if (words.empty()) return mean;
    const Tensor rows = text::glove_embed(words, table);
    for (std::size_t i = 0; i < rows.rows(); ++i)
        for (std::size_t j = 0; j < rows.cols(); ++j) mean[j] += rows(i, j);
    for (double& v : mean) v /= static_cast<double>(words.size());
    return mean;
}

struct AuxLayout {
    std::size_t topics = 8;
    std::size_t glove_dim = 100;

    std::size_t dimension() const { return kSentimentDim + topics + glove_dim; }
    std::size_t topic_offset() const { return kSentimentDim; }
    std::size_t glove_offset() const { return kSentimentDim + topics; }
};

struct AuxEmbedding {
    std::array<double, kSentimentDim> sentiment{};
    std::vector<double> topic;
    std::vector<double> glove_mean;

    std::size_t dimension() const { return kSentimentDim + topic.size() + glove_mean.size(); }

    // Fixed order: sentiment, topic, glove_mean.
    std::vector<double> flatten() const {
        std::vector<double> out(sentiment.begin(), sentiment.end());
        out.insert(out.end(), topic.begin(), topic.end());
        out.insert(out.end(), glove_mean.begin(), glove_mean.end());
        return out;
    }
    Tensor as_row() const { return Tensor::row_vector(flatten()); }
};

inline AuxEmbedding build_aux_embedding(std::span<const double> sentiment, std::span<const double> theta,
                                        std::span<const double> glove, const AuxLayout& layout) {
    if (sentiment.size() != kSentimentDim || theta.size() != layout.topics || glove.size() != layout.glove_dim) {
        throw ShapeError("build_aux_embedding: got (" + std::to_string(sentiment.size()) + ", " +
                         std::to_string(theta.size()) + ", " + std::to_string(glove.size()) + "), expected (" +
                         std::to_string(kSentimentDim) + ", " + std::to_string(layout.topics) + ", " +
                         std::to_string(layout.glove_dim) + ")");
    }
    AuxEmbedding e;
    std::copy(sentiment.begin(), sentiment.end(), e.sentiment.begin());
    e.topic.assign(theta.begin(), theta.end());
    e.glove_mean.assign(glove.begin(), glove.end());
    return e;
}

}  // namespace fusetext::aux
