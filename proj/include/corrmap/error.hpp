#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace corrmap {

// Bad input: malformed files, invalid parameters, violated preconditions.
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well formed but there is not enough of it for the requested stage.
class insufficient_data : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine failed (non-convergence, non-PSD input, overshoot).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-fatal issues collected by estimators (undefined entries, zero
// variances, dropped cells). Pass a pointer to receive them.
struct Diagnostics {
  std::vector<std::string> messages;
  std::size_t dropped_cells = 0;

  void note(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const { return messages.empty(); }
};

inline void note(Diagnostics* diag, std::string msg) {
  if (diag) diag->note(std::move(msg));
}

}  // namespace corrmap
