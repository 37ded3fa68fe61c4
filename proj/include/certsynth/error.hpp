#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace certsynth {

/// Failure categories raised across the library. The CLI maps them to exit codes.
enum class Errc {
  DimensionMismatch,
  NonSymmetric,
  NoConvergence,
  NotHurwitz,
  Singular,
  // mtl
  SyntaxError,
  UnknownVariable,
  NonNormalizedPredicate,
  OutOfDomain,
  EmptyDomain,
  MissingOffset,
  FragmentViolation,
  // sysmodel
  ScheduleMisaligned,
  InvalidSystem,
  // bisim
  CertificateCheckFailed,
  Infeasible,
  MissingZ,
  // lp
  NumericalFailure,
  // feedback / sim
  Precondition,
  // powergrid
  DomainError,
  IslandedNetwork,
  // io
  Config,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonSymmetric: return "NonSymmetric";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::NotHurwitz: return "NotHurwitz";
    case Errc::Singular: return "Singular";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::NonNormalizedPredicate: return "NonNormalizedPredicate";
    case Errc::OutOfDomain: return "OutOfDomain";
    case Errc::EmptyDomain: return "EmptyDomain";
    case Errc::MissingOffset: return "MissingOffset";
    case Errc::FragmentViolation: return "FragmentViolation";
    case Errc::ScheduleMisaligned: return "ScheduleMisaligned";
    case Errc::InvalidSystem: return "InvalidSystem";
    case Errc::CertificateCheckFailed: return "CertificateCheckFailed";
    case Errc::Infeasible: return "Infeasible";
    case Errc::MissingZ: return "MissingZ";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::Precondition: return "Precondition";
    case Errc::DomainError: return "DomainError";
    case Errc::IslandedNetwork: return "IslandedNetwork";
    case Errc::Config: return "Config";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace certsynth
