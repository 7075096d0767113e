#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace regd {

// Malformed or inconsistent input data (files, id lookups, header mismatches).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an edge list that must be acyclic contains a cycle; `cycle`
// holds a witness path v0 -> v1 -> ... -> v0.
struct CycleError : DataError {
  std::vector<std::string> cycle;

  explicit CycleError(std::vector<std::string> witness)
      : DataError(format(witness)), cycle(std::move(witness)) {}

 private:
  static std::string format(const std::vector<std::string>& witness) {
    std::string msg = "cycle detected:";
    for (const auto& id : witness) {
      msg += ' ';
      msg += id;
      msg += " ->";
    }
    if (!witness.empty()) {
      msg += ' ';
      msg += witness.front();
    }
    return msg;
  }
};

}  // namespace regd
