#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fusetext/random.hpp"
#include "fusetext/text.hpp"

using namespace fusetext;
using namespace fusetext::text;
using Words = std::vector<std::string>;

namespace {

std::filesystem::path tmp_file(const std::string& name, const std::string& contents) {
    const std::filesystem::path dir(FUSETEXT_TEST_TMP);
    std::filesystem::create_directories(dir);
    const auto p = dir / name;
    std::ofstream(p) << contents;
    return p;
}

std::string join(const Words& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? " " : "") + w[i];
    return s;
}

// Reference segmentation, written against the rule text: at each offset try
// every remaining length from longest to shortest.
Words reference_wordpiece(const std::string& word, const std::set<std::string>& vocab) {
    if (word.size() > 100) return {"[UNK]"};
    Words out;
    std::size_t pos = 0;
    while (pos < word.size()) {
        bool found = false;
        for (std::size_t len = word.size() - pos; len >= 1; --len) {
            std::string piece = (pos == 0 ? "" : "##") + word.substr(pos, len);
            if (vocab.count(piece)) {
                out.push_back(piece);
                pos += len;
                found = true;
                break;
            }
        }
        if (!found) return {"[UNK]"};
    }
    return out;
}

}  // namespace

TEST(Normalize, LowercasesAndSplits) {
    EXPECT_EQ(normalize_and_tokenize("You are AWFUL"), (Words{"you", "are", "awful"}));
}

TEST(Normalize, MentionsAndUrls) {
    EXPECT_EQ(normalize_and_tokenize("@bob see http://x.co"), (Words{"<user>", "see", "<url>"}));
    EXPECT_EQ(normalize_and_tokenize("HTTPS://A.b/c www.site.org"), (Words{"<url>", "<url>"}));
}

TEST(Normalize, EmptyAndWhitespace) {
    EXPECT_TRUE(normalize_and_tokenize("").empty());
    EXPECT_TRUE(normalize_and_tokenize(" \t\n  ").empty());
}

TEST(Normalize, PunctuationDetached) {
    EXPECT_EQ(normalize_and_tokenize("stop it!! now, ok?"), (Words{"stop", "it", "!", "!", "now", ",", "ok", "?"}));
    EXPECT_EQ(normalize_and_tokenize("@bob_1: hi"), (Words{"<user>", ":", "hi"}));
    EXPECT_EQ(normalize_and_tokenize("don't"), (Words{"don", "'", "t"}));
}

TEST(Normalize, LoneAtSignIsPunctuation) {
    EXPECT_EQ(normalize_and_tokenize("@ home"), (Words{"@", "home"}));
}

TEST(Normalize, IdempotentOnNormalizedWords) {
    const std::string alphabet = "abcXYZ09 .,!?@#'<>:/_-\t";
    Rng rng(17);
    for (int trial = 0; trial < 2000; ++trial) {
        std::string text;
        const std::size_t len = uniform_index(rng, 40);
        for (std::size_t i = 0; i < len; ++i) text += alphabet[uniform_index(rng, alphabet.size())];
        if (uniform_index(rng, 4) == 0) text += " http://t.co/x";
        if (uniform_index(rng, 4) == 0) text = "@user_" + text;
        const Words once = normalize_and_tokenize(text);
        EXPECT_EQ(normalize_and_tokenize(join(once)), once) << "input: " << text;
    }
}

TEST(WordPiece, GreedyLongestMatch) {
    const WordPieceVocab vocab({"[UNK]", "un", "##believ", "##able", "##bel", "##ieve"});
    const auto t = wordpiece_tokenize({"unbelievable"}, vocab);
    EXPECT_EQ(t.pieces, (Words{"un", "##believ", "##able"}));
    EXPECT_EQ(t.piece_to_word, (std::vector<std::size_t>{0, 0, 0}));
}

TEST(WordPiece, WholeWordInVocab) {
    const WordPieceVocab vocab({"[UNK]", "bully", "bu", "##lly"});
    EXPECT_EQ(wordpiece_tokenize({"bully"}, vocab).pieces, (Words{"bully"}));
}

TEST(WordPiece, UnmatchableWordBecomesSingleUnk) {
    const WordPieceVocab vocab({"[UNK]", "z"});
    const auto t = wordpiece_tokenize({"zzz"}, vocab);
    EXPECT_EQ(t.pieces, (Words{"[UNK]"}));
    EXPECT_EQ(t.token_ids, (std::vector<std::size_t>{vocab.unk_id()}));
}

TEST(WordPiece, PartialMatchStillFallsBackToUnk) {
    const WordPieceVocab vocab({"[UNK]", "ab", "##c"});
    EXPECT_EQ(wordpiece_tokenize({"abd"}, vocab).pieces, (Words{"[UNK]"}));
}

TEST(WordPiece, OverlongWordIsUnk) {
    const WordPieceVocab vocab({"[UNK]", "a", "##a"});
    EXPECT_EQ(wordpiece_tokenize({std::string(101, 'a')}, vocab).pieces, (Words{"[UNK]"}));
    EXPECT_EQ(wordpiece_tokenize({std::string(100, 'a')}, vocab).pieces.size(), 100u);
}

TEST(WordPiece, AlignmentInvariants) {
    const WordPieceVocab vocab({"[UNK]", "a", "b", "##a", "##b", "ab"});
    const auto t = wordpiece_tokenize({"ab", "x", "bab", "a"}, vocab);
    ASSERT_EQ(t.pieces.size(), t.piece_to_word.size());
    ASSERT_EQ(t.pieces.size(), t.token_ids.size());
    for (std::size_t i = 1; i < t.piece_to_word.size(); ++i) EXPECT_LE(t.piece_to_word[i - 1], t.piece_to_word[i]);
    EXPECT_EQ(t.piece_to_word.front(), 0u);
    EXPECT_EQ(t.piece_to_word.back(), 3u);
    EXPECT_EQ(word_count(t.piece_to_word), t.words.size());
}

TEST(WordPiece, MatchesCharacterReferenceOnRandomVocabs) {
    Rng rng(23);
    const std::string letters = "abc";
    for (int trial = 0; trial < 300; ++trial) {
        std::set<std::string> pieces{"[UNK]"};
        const std::size_t n = 1 + uniform_index(rng, 12);
        for (std::size_t i = 0; i < n; ++i) {
            std::string p;
            const std::size_t len = 1 + uniform_index(rng, 3);
            for (std::size_t j = 0; j < len; ++j) p += letters[uniform_index(rng, letters.size())];
            pieces.insert(uniform_index(rng, 2) ? "##" + p : p);
        }
        const WordPieceVocab vocab(Words(pieces.begin(), pieces.end()));
        for (int w = 0; w < 20; ++w) {
            std::string word;
            const std::size_t len = 1 + uniform_index(rng, 7);
            for (std::size_t j = 0; j < len; ++j) word += letters[uniform_index(rng, letters.size())];
            EXPECT_EQ(wordpiece_tokenize({word}, vocab).pieces, reference_wordpiece(word, pieces)) << word;
        }
    }
}

TEST(Vocab, RejectsDuplicatesAndMissingUnk) {
    EXPECT_THROW(WordPieceVocab({"[UNK]", "a", "a"}), ValidationError);
    EXPECT_THROW(WordPieceVocab({"a", "b"}), ValidationError);
}

TEST(Glove, LookupAndOov) {
    GloveTable table(3);
    table.insert("cat", {1, 2, 3});
    table.insert("dog", {-1, 0.5, 0});
    const Tensor x = glove_embed({"dog", "cat", "zebra"}, table);
    EXPECT_EQ(x, Tensor::from_rows({{-1, 0.5, 0}, {1, 2, 3}, {0, 0, 0}}));
    EXPECT_EQ(glove_embed({"x", "y"}, table), Tensor(2, 3));
}

TEST(Glove, DefaultDimensionIsHundred) {
    const GloveTable table;
    EXPECT_EQ(table.dimension(), 100u);
    EXPECT_EQ(glove_embed({"a", "b"}, table).cols(), 100u);
}

TEST(Glove, InsertRejectsWrongLength) {
    GloveTable table(3);
    EXPECT_THROW(table.insert("a", {1, 2}), ValidationError);
}

TEST(WordAverage, TwoPiecesAverage) {
    const Tensor states = Tensor::from_rows({{1, 2}, {3, 6}, {5, 5}});
    EXPECT_EQ(word_average(states, {0, 0, 1}), Tensor::from_rows({{2, 4}, {5, 5}}));
}

TEST(WordAverage, IdentityAlignment) {
    const Tensor states = Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}});
    EXPECT_EQ(word_average(states, {0, 1, 2}), states);
}

TEST(WordAverage, EmptyGroupIsContractError) {
    EXPECT_THROW(word_average(Tensor(2, 2), {0, 2}), ContractError);
}

// Averaging each word's slice on its own reproduces the grouped result, and
// count-weighting the word means recovers the mean over all pieces. Values
// are small dyadics so every sum is exact.
TEST(WordAverage, CommutesWithAlignmentRefinement) {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t words = 1 + uniform_index(rng, 6);
        std::vector<std::size_t> align;
        std::vector<double> counts(words);
        for (std::size_t w = 0; w < words; ++w) {
            const std::size_t k = 1 + uniform_index(rng, 4);
            counts[w] = static_cast<double>(k);
            for (std::size_t j = 0; j < k; ++j) align.push_back(w);
        }
        Tensor states(align.size(), 3);
        for (double& v : states.data()) v = static_cast<double>(static_cast<int>(uniform_index(rng, 33)) - 16) / 4.0;

        const Tensor grouped = word_average(states, align);
        std::size_t start = 0;
        for (std::size_t w = 0; w < words; ++w) {
            const auto n = static_cast<std::size_t>(counts[w]);
            const Tensor alone = word_average(dense::slice_rows(states, start, n), std::vector<std::size_t>(n, 0));
            EXPECT_EQ(alone, dense::slice_rows(grouped, w, 1));
            start += n;
        }
        const Tensor all = word_average(states, std::vector<std::size_t>(align.size(), 0));
        for (std::size_t j = 0; j < 3; ++j) {
            double weighted = 0.0;
            for (std::size_t w = 0; w < words; ++w) weighted += counts[w] * grouped(w, j);
            EXPECT_DOUBLE_EQ(weighted / static_cast<double>(align.size()), all(0, j));
        }
    }
}

TEST(Loaders, GloveFileRoundTrip) {
    std::string line = "cat";
    for (int i = 0; i < 100; ++i) line += " " + std::to_string(i * 0.01);
    const auto p = tmp_file("glove_ok.txt", line + "\n\nbat" + line.substr(3) + "\n");
    const GloveTable t = load_glove_table(p);
    EXPECT_EQ(t.dimension(), 100u);
    ASSERT_NE(t.find("cat"), nullptr);
    EXPECT_EQ(t.find("cat")->size(), 100u);
    EXPECT_DOUBLE_EQ((*t.find("bat"))[7], 0.07);
}

TEST(Loaders, GloveShortLineNamesLine) {
    std::string good = "cat", bad = "dog";
    for (int i = 0; i < 100; ++i) good += " 0.5";
    for (int i = 0; i < 99; ++i) bad += " 0.5";
    const auto p = tmp_file("glove_bad.txt", good + "\n" + bad + "\n");
    try {
        load_glove_table(p, 100);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
}

TEST(Loaders, GloveBadNumberAndMissingFile) {
    EXPECT_THROW(load_glove_table(tmp_file("glove_nan.txt", "cat 0.1 abc\n")), ParseError);
    EXPECT_THROW(load_glove_table("/nonexistent/glove.txt"), ParseError);
    EXPECT_THROW(load_glove_table(tmp_file("glove_dim.txt", "cat 0.1 0.2\n"), 100), ParseError);
}

TEST(Loaders, VocabFile) {
    const auto v = load_vocab(tmp_file("vocab_ok.txt", "[UNK]\n[CLS]\nhello\n##lo\n"));
    EXPECT_EQ(v.size(), 4u);
    EXPECT_EQ(*v.find("##lo"), 3u);
}

TEST(Loaders, VocabDuplicateIsError) {
    try {
        load_vocab(tmp_file("vocab_dup.txt", "[UNK]\nhi\nyo\nhi\n"));
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("hi"), std::string::npos) << e.what();
    }
    EXPECT_THROW(load_vocab(tmp_file("vocab_nounk.txt", "a\nb\n")), ParseError);
}
