#pragma once

#include <stdexcept>
#include <string>

namespace fusetext {

// Tensor shapes that cannot be combined.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Malformed input file (GloVe table, vocab, lexicon, CSV, JSON).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Well-formed input with values outside the accepted range.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training diverged or hit a numerical failure.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fusetext
