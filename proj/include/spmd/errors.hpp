#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spmd {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- expression language ---------------------------------------------------

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)),
        message_(message),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::size_t position_;
};

class UnknownFunction : public ParseError {
 public:
  UnknownFunction(const std::string& name, std::size_t position)
      : ParseError("unknown function '" + name + "'", position) {}
};

class UnknownVariable : public ParseError {
 public:
  UnknownVariable(const std::string& name, std::size_t position)
      : ParseError("unknown variable '" + name + "' (only 'x' is allowed)",
                   position) {}
};

// --- grid ------------------------------------------------------------------

class InvalidGrid : public Error {
 public:
  using Error::Error;
};

class InvalidPartitioning : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// --- protocol --------------------------------------------------------------

class IoError : public Error {
 public:
  using Error::Error;
};

class MalformedSpec : public Error {
 public:
  using Error::Error;
};

class MalformedResult : public Error {
 public:
  using Error::Error;
};

// --- master ----------------------------------------------------------------

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyNodeList : public Error {
 public:
  EmptyNodeList() : Error("node list is empty") {}
};

class SpawnError : public Error {
 public:
  using Error::Error;
};

class TimeoutExpired : public Error {
 public:
  explicit TimeoutExpired(std::vector<int> pending);
  const std::vector<int>& pending_ranks() const noexcept { return pending_; }

 private:
  std::vector<int> pending_;
};

struct WorkerFailure {
  int rank;
  std::string message;
};

class WorkerFailed : public Error {
 public:
  explicit WorkerFailed(std::vector<WorkerFailure> failures);
  const std::vector<WorkerFailure>& failures() const noexcept {
    return failures_;
  }

 private:
  std::vector<WorkerFailure> failures_;
};

class CountMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyResults : public Error {
 public:
  EmptyResults() : Error("no worker results to aggregate") {}
};

// --- bench -----------------------------------------------------------------

class NonPositiveTime : public Error {
 public:
  using Error::Error;
};

class RowNotFound : public Error {
 public:
  using Error::Error;
};

class BenchCellFailed : public Error {
 public:
  BenchCellFailed(int m, int nproc, const std::string& what)
      : Error("bench cell m=" + std::to_string(m) +
              " nproc=" + std::to_string(nproc) + " failed: " + what),
        m_(m),
        nproc_(nproc) {}
  int m() const noexcept { return m_; }
  int nproc() const noexcept { return nproc_; }

 private:
  int m_;
  int nproc_;
};

}  // namespace spmd
