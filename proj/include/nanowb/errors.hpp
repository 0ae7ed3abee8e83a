#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nanowb {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A quadrilateral became inverted or degenerate.
class MeshTangled : public Error {
 public:
  MeshTangled(int cell, const std::string& what)
      : Error(what + " (cell " + std::to_string(cell) + ")"), cell_(cell) {}
  int cell() const noexcept { return cell_; }

 private:
  int cell_;
};

/// Non-finite values, failed iterations, or an unusable time step.
class NumericalFailure : public Error {
 public:
  NumericalFailure(long step, int cell, const std::string& what)
      : Error(what + " (step " + std::to_string(step) + ", cell " + std::to_string(cell) + ")"),
        step_(step),
        cell_(cell) {}
  long step() const noexcept { return step_; }
  int cell() const noexcept { return cell_; }

 private:
  long step_;
  int cell_;
};

/// MLS recovery failure at a query point.
class RecoveryError : public Error {
 public:
  RecoveryError(double x, double y, const std::string& what)
      : Error(what + " at (" + std::to_string(x) + ", " + std::to_string(y) + ")"), x_(x), y_(y) {}
  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }

 private:
  double x_, y_;
};

class InsufficientSupport : public RecoveryError {
 public:
  InsufficientSupport(double x, double y) : RecoveryError(x, y, "insufficient MLS support") {}
};

class IllConditioned : public RecoveryError {
 public:
  IllConditioned(double x, double y, double condition)
      : RecoveryError(x, y, "ill-conditioned MLS system (condition " + std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class TooLarge : public Error {
 public:
  TooLarge(std::size_t requested, std::size_t cap)
      : Error("atom count " + std::to_string(requested) + " exceeds cap " + std::to_string(cap)),
        requested_(requested),
        cap_(cap) {}
  std::size_t requested() const noexcept { return requested_; }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t requested_, cap_;
};

class EmptyParticle : public Error {
 public:
  using Error::Error;
};

/// Two placed particles come closer than the clearance.
class ParticleCollision : public Error {
 public:
  ParticleCollision(int first, int second)
      : Error("placements " + std::to_string(first) + " and " + std::to_string(second) +
              " overlap within clearance"),
        first_(first),
        second_(second) {}
  std::pair<int, int> pair() const noexcept { return {first_, second_}; }

 private:
  int first_, second_;
};

class FileError : public Error {
 public:
  FileError(std::string path, const std::string& what)
      : Error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

struct ValidationIssue {
  std::string path;  // JSON pointer into the document
  std::string message;
};

/// Carries every problem found in a scene document, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(summarize(issues)), issues_(std::move(issues)) {}
  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string out = std::to_string(issues.size()) + " validation error(s)";
    for (const auto& i : issues) out += "\n  " + (i.path.empty() ? "/" : i.path) + ": " + i.message;
    return out;
  }
  std::vector<ValidationIssue> issues_;
};

}  // namespace nanowb
