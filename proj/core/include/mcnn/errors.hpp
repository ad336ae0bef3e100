#pragma once

#include <stdexcept>
#include <string>

namespace mcnn {

// Shape disagreement between tensor operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated by the caller.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid architecture or run configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data (FASTA, TSV, dataset files).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A class label fell outside the configured schema.
struct LabelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A token id fell outside the vocabulary.
struct VocabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Corrupt, truncated, or incompatible model checkpoint.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A sequence had no valid (non-padding) positions where at least one is required.
struct EmptySequenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A sequence was shorter than the window it must support.
struct SequenceTooShortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A sequence contained a character outside the accepted alphabet.
struct AlphabetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mcnn
