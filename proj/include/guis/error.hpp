#pragma once

#include <stdexcept>
#include <string>

namespace guis {

// Base for every domain error raised by the library. The CLI maps these to
// exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateQuad : public Error {
 public:
  DegenerateQuad() : Error("degenerate quad: points are collinear or the system is singular") {}
};

class EmptyImage : public Error {
 public:
  EmptyImage() : Error("empty image") {}
};

class UnknownClass : public Error {
 public:
  explicit UnknownClass(std::string label)
      : Error("unknown element class: " + label), label_(std::move(label)) {}
  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace guis
