#pragma once

#include <stdexcept>
#include <string>

namespace dnnchip {

// Values double as the CLI exit codes.
enum class ErrorCategory : int {
  Parse = 1,
  Validation = 2,
  Simulation = 3,
  Io = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace dnnchip
