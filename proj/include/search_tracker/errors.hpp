#pragma once

#include <stdexcept>
#include <string>

namespace search_tracker {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable file content (PNM, .flo, CSV, index tables).
class FormatError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

/// Region or cube sizes that do not tile evenly.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// An annotation or table entry points at something that does not exist.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

class EmptyQuery : public Error {
 public:
  using Error::Error;
};

class EmptyOverlap : public Error {
 public:
  using Error::Error;
};

/// A metric has no defined value for the given input (e.g. MOTA without GT).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Violated argument contract (negative thresholds, empty ranges, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace search_tracker
