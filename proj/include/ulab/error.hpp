#pragma once

#include <stdexcept>
#include <string>

namespace ulab {

enum class ErrorCode {
  NoConvergence,
  ChartSingular,
  NotInChart,
  BudgetExceeded,
  OverflowGuard,
  RegimeViolation,
  CannotRegularize,
  InjectivityViolation,
  CertificateMissing,
  QuadratureFailure,
  InvalidArgument,
  InvalidCertificate,
  MissingManifest,
  ParseError,
};

const char* to_string(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

// Soft precondition breaches.  Printed to stderr unless a sink is installed.
using WarnSink = void (*)(const std::string&);
void set_warn_sink(WarnSink sink);
void warn(const std::string& what);

}  // namespace ulab
