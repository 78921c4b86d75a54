#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Base class for every failure the library reports. Catching forge::Error
// at a CLI boundary maps to exit code 1; IoError maps to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

// --- prediction tables ---
class MalformedFile : public Error {
 public:
  using Error::Error;
};
class LabelOutOfRange : public Error {
 public:
  using Error::Error;
};
class DuplicateClassifier : public Error {
 public:
  using Error::Error;
};
class RowOrderMismatch : public Error {
 public:
  using Error::Error;
};
class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// --- fusion / optimizer ---
class EmptyEnsemble : public Error {
 public:
  using Error::Error;
};
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class EmptySelection : public Error {
 public:
  using Error::Error;
};
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// --- metric losses ---
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class NonPositiveBandwidth : public Error {
 public:
  using Error::Error;
};
class DegenerateDenominator : public Error {
 public:
  using Error::Error;
};
class InsufficientCenters : public Error {
 public:
  using Error::Error;
};
class InvalidProbability : public Error {
 public:
  using Error::Error;
};
class MissingProxy : public Error {
 public:
  using Error::Error;
};
class EmptyBatch : public Error {
 public:
  using Error::Error;
};
class NoPositives : public Error {
 public:
  using Error::Error;
};
class UnknownClass : public Error {
 public:
  using Error::Error;
};
class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

// --- lab ---
class InsufficientData : public Error {
 public:
  using Error::Error;
};
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

// --- experiments ---
class ManifestIncomplete : public Error {
 public:
  using Error::Error;
};
class ClassifierSetMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace forge
