#pragma once

#include <stdexcept>
#include <string>

namespace xstab {

enum class Err {
  Io,
  Format,
  EmptyInput,
  InvalidParameter,
  ShapeMismatch,
  DegenerateQuad,
  ZeroMass,
  NegativeValue,
  NonFiniteInput,
  ZeroVariance,
  IdenticalInputs,
  NoValidVariants,
  ZeroBaseline,
  LengthMismatch,
  EmptyFixations,
  EmptyDataset,
  EmptyTrainingSet,
  InvalidLayer,
  EmptyLevel,
  Config,
  Data,
};

// Single exception type carrying a stable error code; the C API maps the
// code onto xstab_status values.
class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) { throw Error(code, msg); }

inline const char* err_name(Err e) {
  switch (e) {
    case Err::Io: return "IoError";
    case Err::Format: return "FormatError";
    case Err::EmptyInput: return "EmptyInput";
    case Err::InvalidParameter: return "InvalidParameter";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::DegenerateQuad: return "DegenerateQuad";
    case Err::ZeroMass: return "ZeroMass";
    case Err::NegativeValue: return "NegativeValue";
    case Err::NonFiniteInput: return "NonFiniteInput";
    case Err::ZeroVariance: return "ZeroVariance";
    case Err::IdenticalInputs: return "IdenticalInputs";
    case Err::NoValidVariants: return "NoValidVariants";
    case Err::ZeroBaseline: return "ZeroBaseline";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::EmptyFixations: return "EmptyFixations";
    case Err::EmptyDataset: return "EmptyDataset";
    case Err::EmptyTrainingSet: return "EmptyTrainingSet";
    case Err::InvalidLayer: return "InvalidLayer";
    case Err::EmptyLevel: return "EmptyLevel";
    case Err::Config: return "ConfigError";
    case Err::Data: return "DataError";
  }
  return "Error";
}

}  // namespace xstab
