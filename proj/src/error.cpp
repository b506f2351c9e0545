#include "ulab/error.hpp"

#include <atomic>
#include <cstdio>

namespace ulab {

const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ChartSingular: return "ChartSingular";
    case ErrorCode::NotInChart: return "NotInChart";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::OverflowGuard: return "OverflowGuard";
    case ErrorCode::RegimeViolation: return "RegimeViolation";
    case ErrorCode::CannotRegularize: return "CannotRegularize";
    case ErrorCode::InjectivityViolation: return "InjectivityViolation";
    case ErrorCode::CertificateMissing: return "CertificateMissing";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidCertificate: return "InvalidCertificate";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

namespace {
std::atomic<WarnSink> g_sink{nullptr};
}

void set_warn_sink(WarnSink sink) { g_sink = sink; }

void warn(const std::string& what) {
  if (WarnSink s = g_sink.load()) {
    s(what);
    return;
  }
  std::fprintf(stderr, "warning: %s\n", what.c_str());
}

}  // namespace ulab
