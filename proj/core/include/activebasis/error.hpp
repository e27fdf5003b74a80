#pragma once

#include <stdexcept>
#include <string>

namespace abm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, grids or option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, unwritable or corrupt files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An image, lattice or pyramid too small for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Inputs with no usable contrast (e.g. a constant image).
class DegenerateImageError : public Error {
 public:
  using Error::Error;
};

/// Every candidate position of a lookup falls inside the invalid border.
class MarginError : public Error {
 public:
  using Error::Error;
};

}  // namespace abm
