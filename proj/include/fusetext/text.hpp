#pragma once

// Tweet preprocessing: normalization, word tokenization, WordPiece subwords,
// GloVe lookup and word-level averaging of subword states.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fusetext/autodiff.hpp"
#include "fusetext/errors.hpp"
#include "fusetext/tensor.hpp"

namespace fusetext::text {

inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::string_view kUserToken = "<user>";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::size_t kMaxCharsPerWord = 100;

namespace detail {

inline bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// ASCII punctuation splits; bytes >= 0x80 (UTF-8 sequences) stay inside words.
inline bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    return true;
}

inline bool is_url(std::string_view tok) {
    return starts_with_ci(tok, "http://") || starts_with_ci(tok, "https://") || starts_with_ci(tok, "www.");
}

inline bool is_handle_char(unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c >= 0x80; }

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline void split_punct(std::string_view tok, std::vector<std::string>& out) {
    std::string word;
    for (char ch : tok) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_punct(c)) {
            if (!word.empty()) out.push_back(std::move(word)), word.clear();
            out.emplace_back(1, static_cast<char>(std::tolower(c)));
        } else {
            word.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!word.empty()) out.push_back(std::move(word));
}

}  // namespace detail

// Lowercases, maps URLs to <url> and @-mentions to <user>, splits on
// whitespace and detaches ASCII punctuation. <url> and <user> survive a
// second pass unchanged.
inline std::vector<std::string> normalize_and_tokenize(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && detail::is_space(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !detail::is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (start == i) continue;
        std::string_view tok = text.substr(start, i - start);

        if (tok == kUrlToken || tok == kUserToken) {
            words.emplace_back(tok);
        } else if (detail::is_url(tok)) {
            words.emplace_back(kUrlToken);
        } else if (tok.size() > 1 && tok[0] == '@' && detail::is_handle_char(static_cast<unsigned char>(tok[1]))) {
            std::size_t end = 1;
            while (end < tok.size() && detail::is_handle_char(static_cast<unsigned char>(tok[end]))) ++end;
            words.emplace_back(kUserToken);
            detail::split_punct(tok.substr(end), words);
        } else {
            detail::split_punct(tok, words);
        }
    }
    return words;
}

class WordPieceVocab {
public:
    WordPieceVocab() = default;
    explicit WordPieceVocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (!index_.emplace(tokens_[i], i).second) {
                throw ValidationError("duplicate vocab token '" + tokens_[i] + "'");
            }
        }
        const auto unk = index_.find(std::string(kUnkToken));
        if (unk == index_.end()) throw ValidationError("vocab does not contain " + std::string(kUnkToken));
        unk_id_ = unk->second;
    }

    std::size_t size() const { return tokens_.size(); }
    std::size_t unk_id() const { return unk_id_; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t id) const { return tokens_.at(id); }

    std::optional<std::size_t> find(const std::string& piece) const {
        if (auto it = index_.find(piece); it != index_.end()) return it->second;
        return std::nullopt;
    }
    bool contains(const std::string& piece) const { return index_.contains(piece); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t unk_id_ = 0;
};

struct TokenizedTweet {
    std::vector<std::string> words;
    std::vector<std::string> pieces;
    std::vector<std::size_t> piece_to_word;
    std::vector<std::size_t> token_ids;
};

// Greedy longest-match-first segmentation of one word. Returns empty when
// no full decomposition exists.
inline std::vector<std::size_t> wordpiece_word(const std::string& word, const WordPieceVocab& vocab) {
    std::vector<std::size_t> ids;
    if (word.size() > kMaxCharsPerWord) return ids;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        std::optional<std::size_t> match;
        while (start < end) {
            std::string candidate = word.substr(start, end - start);
            if (start > 0) candidate = "##" + candidate;
            if ((match = vocab.find(candidate))) break;
            --end;
        }
        if (!match) return {};
        ids.push_back(*match);
        start = end;
    }
    return ids;
}

inline TokenizedTweet wordpiece_tokenize(const std::vector<std::string>& words, const WordPieceVocab& vocab) {
    if (vocab.size() == 0) throw ContractError("wordpiece_tokenize: empty vocab");
    TokenizedTweet out;
    out.words = words;
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::vector<std::size_t> ids = wordpiece_word(words[w], vocab);
        if (ids.empty()) ids.push_back(vocab.unk_id());
        for (std::size_t id : ids) {
            out.pieces.push_back(vocab.token(id));
            out.piece_to_word.push_back(w);
            out.token_ids.push_back(id);
        }
    }
    return out;
}

class GloveTable {
public:
    explicit GloveTable(std::size_t dimension = 100) : dimension_(dimension) {
        if (dimension == 0) throw ValidationError("GloVe dimension must be positive");
    }

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return entries_.size(); }

    void insert(std::string word, std::vector<double> vec) {
        if (vec.size() != dimension_) {
            throw ValidationError("GloVe vector for '" + word + "' has " + std::to_string(vec.size()) +
                                  " values, expected " + std::to_string(dimension_));
        }
        entries_.insert_or_assign(std::move(word), std::move(vec));
    }

    const std::vector<double>* find(const std::string& word) const {
        auto it = entries_.find(word);
        return it == entries_.end() ? nullptr : &it->second;
    }

private:
    std::size_t dimension_;
    std::unordered_map<std::string, std::vector<double>> entries_;
};

// Row i is the vector for words[i]; OOV words get the zero vector.
inline Tensor glove_embed(const std::vector<std::string>& words, const GloveTable& table) {
    Tensor out(words.size(), table.dimension());
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (const auto* vec = table.find(words[i])) {
            for (std::size_t j = 0; j < vec->size(); ++j) out(i, j) = (*vec)[j];
        }
    }
    return out;
}

inline std::size_t word_count(const std::vector<std::size_t>& piece_to_word) {
    return piece_to_word.empty() ? 0 : piece_to_word.back() + 1;
}

// Row w is the mean of the subword rows aligned to word w.
inline Var word_average(Var subword_states, const std::vector<std::size_t>& piece_to_word) {
    return ad::group_mean_rows(subword_states, piece_to_word, word_count(piece_to_word));
}

inline Tensor word_average(const Tensor& subword_states, const std::vector<std::size_t>& piece_to_word) {
    Tape tape;
    return word_average(tape.constant(subword_states), piece_to_word).value();
}

// ---------------------------------------------------------------------------
// File loaders.

namespace detail {

inline std::ifstream open_or_throw(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ParseError(std::string("cannot open ") + what + " file " + path.string());
    return in;
}

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace detail

// `word v1 v2 ... v_dim` per line. The dimension is taken from the first
// entry unless `expected_dimension` is nonzero.
inline GloveTable load_glove_table(const std::filesystem::path& path, std::size_t expected_dimension = 0) {
    auto in = detail::open_or_throw(path, "GloVe");
    std::optional<GloveTable> table;
    if (expected_dimension != 0) table.emplace(expected_dimension);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(std::move(line));
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream fields(line);
        std::string word;
        fields >> word;
        std::vector<double> vec;
        std::string tok;
        while (fields >> tok) {
            try {
                std::size_t used = 0;
                vec.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
            }
        }
        if (vec.empty()) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": no vector values");
        if (!table) table.emplace(vec.size());
        if (vec.size() != table->dimension()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table->dimension()) + " values, got " + std::to_string(vec.size()));
        }
        table->insert(std::move(word), std::move(vec));
    }
    if (!table) throw ParseError("GloVe file " + path.string() + " has no entries");
    return std::move(*table);
}

inline WordPieceVocab load_vocab(const std::filesystem::path& path) {
    auto in = detail::open_or_throw(path, "vocab");
    std::vector<std::string> tokens;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(std::move(line));
        if (line.empty()) continue;
        if (auto [it, fresh] = seen.emplace(line, line_no); !fresh) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": duplicate token '" + line +
                             "' (first on line " + std::to_string(it->second) + ")");
        }
        tokens.push_back(line);
    }
    try {
        return WordPieceVocab(std::move(tokens));
    } catch (const ValidationError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace fusetext::text
