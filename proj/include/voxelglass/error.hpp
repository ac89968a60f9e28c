#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vg {

// Base of every module error. `code()` is the stable machine-readable
// identifier (e.g. "ChecksumMismatch") printed by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Binds a module's error enum to Error. The enum needs a `to_string` overload
// reachable by ADL.
template <class Errc>
class CodedError : public Error {
 public:
  CodedError(Errc errc, const std::string& message)
      : Error(std::string(to_string(errc)), message), errc_(errc) {}

  Errc errc() const noexcept { return errc_; }

 private:
  Errc errc_;
};

}  // namespace vg
