#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace binsim {

// Bad user input: malformed files, unknown ids, invalid configuration.
// The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedInstruction : public InputError {
 public:
  explicit MalformedInstruction(std::string line)
      : InputError("malformed instruction: '" + line + "'"), line_(std::move(line)) {}
  const std::string& line() const { return line_; }

 private:
  std::string line_;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : InputError("parse error at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Tensor dimensions that do not line up.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace binsim
