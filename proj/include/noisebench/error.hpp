#pragma once

#include <stdexcept>
#include <string>

namespace noisebench {

// Error taxonomy. Callers discriminate by type; messages carry the context
// (offending value, file path, flag name).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  using Error::Error;
};  // malformed files, bad record contents

struct ValueError : Error {
  using Error::Error;
};  // out-of-range parameters, wrong sizes, empty input

struct ShapeError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};  // non-finite values where finiteness is required

struct IoError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};  // command-line misuse, maps to exit code 2

// A training run whose loss went non-finite; carries the epoch it happened in.
struct DivergedError : Error {
  int epoch;
  DivergedError(int epoch_idx, const std::string& msg) : Error(msg), epoch(epoch_idx) {}
};

}  // namespace noisebench
