#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace readbench {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySampleSet : public Error {
 public:
  EmptySampleSet() : Error("latency sample set is empty") {}
};

class InvalidInterval : public Error {
 public:
  using Error::Error;
};

class ClockError : public Error {
 public:
  using Error::Error;
};

class PrepareError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Content read back does not match the fill pattern.
class VerifyError : public Error {
 public:
  explicit VerifyError(std::uint64_t offset)
      : Error("verification failed at byte offset " + std::to_string(offset)),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class Backpressure : public Error {
 public:
  using Error::Error;
};

/// The kernel lacks an interface or feature an engine needs.
class EngineUnsupported : public Error {
 public:
  explicit EngineUnsupported(std::string feature, const std::string& detail = {})
      : Error("engine unsupported: " + feature + (detail.empty() ? "" : " (" + detail + ")")),
        feature_(std::move(feature)) {}

  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class AbortedRun : public Error {
 public:
  using Error::Error;
};

class NoSuchPreset : public Error {
 public:
  using Error::Error;
};

class LabelParseError : public Error {
 public:
  LabelParseError(const std::string& label, std::size_t position, const std::string& what)
      : Error("bad label '" + label + "' at position " + std::to_string(position) + ": " + what),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Invalid configuration, plan file or model file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace readbench
