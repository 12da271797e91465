#pragma once

#include <stdexcept>
#include <string>

namespace melanin {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Image file could not be read or written.
class ImageError : public Error {
 public:
  using Error::Error;
};

// Manifest, dataset or scenario is unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

// Shape-code byte stream rejected by the decoder.
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, ChecksumMismatch, InvalidHeader };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace melanin
