#pragma once

#include <stdexcept>
#include <string>

namespace genmc {

// Error taxonomy shared by the whole library. The C API maps these onto
// status codes, and the CLI maps status codes onto exit codes, so every
// throw site picks the category deliberately.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform (matmul inner dims, concat widths, ...).
struct DimensionError : Error {
    using Error::Error;
};

// An index or token id is out of range.
struct IndexError : Error {
    using Error::Error;
};

// An API contract was violated (non-scalar backward, empty target, ...).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite values encountered where finite math is required.
struct NumericError : Error {
    using Error::Error;
};

// Bad user-supplied data (malformed JSONL, out-of-range answer index, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Filesystem problems: missing files, unreadable checkpoints.
struct IoError : Error {
    using Error::Error;
};

}  // namespace genmc
