#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gls {

enum class ErrorKind {
  Configuration,
  Domain,
  DataConsistency,
  Parse,
  Conflict,
  IncompleteDay,
  Authorization,
  Authentication,
  Validation,
  NotFound,
  Integrity,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::DataConsistency: return "data_consistency";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::IncompleteDay: return "incomplete_day";
    case ErrorKind::Authorization: return "authorization";
    case ErrorKind::Authentication: return "authentication";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library. Carries a category so front ends
/// (HTTP status, CLI exit code) can map it without string matching. `line`
/// and `hour` are filled when the failure is tied to an input row or slot.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<int> line = {},
        std::optional<int> hour = {})
      : std::runtime_error(what), kind_(kind), line_(line), hour_(hour) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<int> line() const noexcept { return line_; }
  std::optional<int> hour() const noexcept { return hour_; }

 private:
  ErrorKind kind_;
  std::optional<int> line_;
  std::optional<int> hour_;
};

}  // namespace gls
