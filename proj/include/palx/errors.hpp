#pragma once

#include <stdexcept>
#include <string>

namespace palx {

// Exception taxonomy. Each maps to one failure class surfaced by the CLI:
// usage/config -> exit 1, data/parse -> exit 2, numerical abort -> exit 3.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched tensor/matrix dimensions.
struct DimensionError : Error {
  using Error::Error;
};

// Violated call contract (bad argument, missing precondition).
struct ContractError : Error {
  using Error::Error;
};

// Object used in an invalid state (e.g. gradient tape already consumed).
struct StateError : Error {
  using Error::Error;
};

// Out-of-range index (e.g. target id >= vocab size).
struct IndexError : Error {
  using Error::Error;
};

// Bad configuration value or unknown config key.
struct ConfigError : Error {
  using Error::Error;
};

// Low-level parse failure (XML, PGM, checkpoint container).
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid input missing required content.
struct SchemaError : Error {
  using Error::Error;
};

// Token not in vocabulary / not in glyph atlas.
struct TokenError : Error {
  using Error::Error;
};

// Dataset-level failure (missing files, empty dataset, bad record).
struct DataError : Error {
  using Error::Error;
};

// Non-finite loss or other numerical abort during training.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace palx
