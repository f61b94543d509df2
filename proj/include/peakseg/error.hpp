#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace peakseg {

/// Failure categories. The CLI maps these onto process exit codes.
enum class Errc {
  parse,             // malformed input record
  dataset_empty,     // no data rows
  duplicate_key,     // repeated (customer, timestamp)
  insufficient_data, // too few samples or days
  degenerate_input,  // e.g. all profiles identical
  rank_deficient,    // regression design without spread
  invalid_argument,  // precondition violated by the caller
  numeric,           // non-finite values, solver failure
  missing_artifact,  // upstream file not produced yet
  config,            // bad configuration document
  manifest_mismatch, // --strict hash check failed
};

inline const char *to_string(Errc e) {
  switch (e) {
  case Errc::parse: return "parse";
  case Errc::dataset_empty: return "dataset-empty";
  case Errc::duplicate_key: return "duplicate-key";
  case Errc::insufficient_data: return "insufficient-data";
  case Errc::degenerate_input: return "degenerate-input";
  case Errc::rank_deficient: return "rank-deficient";
  case Errc::invalid_argument: return "invalid-argument";
  case Errc::numeric: return "numeric";
  case Errc::missing_artifact: return "missing-artifact";
  case Errc::config: return "config";
  case Errc::manifest_mismatch: return "manifest-mismatch";
  }
  return "unknown";
}

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

/// Record-level parse failure; `line()` is 1-based and counts the header.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string &what)
      : Error(Errc::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Process exit code: 2 validation, 3 missing artifact, 4 numeric failure.
inline int exit_code(Errc e) {
  switch (e) {
  case Errc::missing_artifact: return 3;
  case Errc::numeric:
  case Errc::rank_deficient: return 4;
  default: return 2;
  }
}

} // namespace peakseg
