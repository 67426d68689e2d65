#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nvcavity {

/// Base class for every domain error. `module()` names the subsystem that
/// raised it ("cavity", "lockin", ...) so front ends can tag messages.
class Error : public std::runtime_error {
public:
  Error(std::string module, const std::string &what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string &module() const noexcept { return module_; }

private:
  std::string module_;
};

#define NVCAVITY_DEFINE_ERROR(Name)                                            \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
  }

NVCAVITY_DEFINE_ERROR(InvalidArgument);
NVCAVITY_DEFINE_ERROR(UnboundedFinesse);
NVCAVITY_DEFINE_ERROR(NoSolution);
NVCAVITY_DEFINE_ERROR(AmbiguousSolution);
NVCAVITY_DEFINE_ERROR(NonPhysicalLoss);
NVCAVITY_DEFINE_ERROR(UnstableResonator);
NVCAVITY_DEFINE_ERROR(Undersampled);
NVCAVITY_DEFINE_ERROR(Aliasing);
NVCAVITY_DEFINE_ERROR(RecordTooShort);
NVCAVITY_DEFINE_ERROR(EmptyBand);
NVCAVITY_DEFINE_ERROR(DegenerateDesign);
NVCAVITY_DEFINE_ERROR(ZeroSlope);
NVCAVITY_DEFINE_ERROR(FitError);
NVCAVITY_DEFINE_ERROR(PeakCountMismatch);
NVCAVITY_DEFINE_ERROR(TooFewPeaks);

#undef NVCAVITY_DEFINE_ERROR

/// Parse errors carry the offending line; consistency errors name both fields.
class ConfigError : public Error {
public:
  ConfigError(const std::string &what, int line = 0)
      : Error("config", line > 0 ? "line " + std::to_string(line) + ": " + what
                                 : what),
        line_(line) {}

  int line() const noexcept { return line_; }

private:
  int line_;
};

/// Non-fatal conditions collected by operations that can proceed anyway.
using Warnings = std::vector<std::string>;

inline void warn(Warnings *sink, std::string message) {
  if (sink != nullptr) {
    sink->push_back(std::move(message));
  }
}

} // namespace nvcavity
