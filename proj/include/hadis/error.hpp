#pragma once

#include <stdexcept>
#include <string>

namespace hadis {

// Exception carrying a stable, machine-readable code such as
// "batch-not-profiled" next to the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace hadis
