// Writes a synthetic labeled corpus plus vocab, GloVe, lexicon and config
// files that `fusetext train` accepts.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "synthetic_corpus.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic toy corpus", "make_toy_corpus"};
    std::string out_dir;
    fusetext::synth::CorpusOptions opt;
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--examples", opt.examples, "Number of tweets");
    app.add_option("--seed", opt.seed, "Generator seed");
    app.add_option("--pool-size", opt.pool_size, "Pseudo-words per class");
    app.add_option("--zipf", opt.zipf_exponent, "Zipf exponent of class-word frequencies");
    app.add_option("--class-rate", opt.class_word_rate, "Share of class words per tweet");
    app.add_option("--centroid-scale", opt.centroid_scale, "Norm of each class centroid vector");
    app.add_option("--glove-noise", opt.glove_noise, "Spread of word vectors around their class centroid");
    CLI11_PARSE(app, argc, argv);

    const auto corpus = fusetext::synth::make_corpus(opt);
    const auto files = fusetext::synth::write_corpus(corpus, out_dir);
    std::cout << "wrote " << corpus.examples.size() << " examples to " << files.data.string() << '\n'
              << "config " << files.config.string() << '\n';
    return 0;
}
