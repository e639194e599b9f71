#pragma once

#include <stdexcept>
#include <string>

namespace vcstk {

// All toolkit errors carry a stable code string (used by the CLI for exit
// messages and by tests to assert on the failure kind) plus a human message.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

#define VCSTK_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
  public:                                                          \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// voxel-io
VCSTK_DEFINE_ERROR(BadMagic);
VCSTK_DEFINE_ERROR(UnsupportedDatatype);
VCSTK_DEFINE_ERROR(TruncatedFile);
VCSTK_DEFINE_ERROR(NonPositiveDim);
VCSTK_DEFINE_ERROR(SizeMismatch);
VCSTK_DEFINE_ERROR(LabelOverflow);
VCSTK_DEFINE_ERROR(IoError);

// region-atlas
VCSTK_DEFINE_ERROR(DimsMismatch);
VCSTK_DEFINE_ERROR(EmptyClass);

// vcs-metric
VCSTK_DEFINE_ERROR(LengthMismatch);
VCSTK_DEFINE_ERROR(TooShort);
VCSTK_DEFINE_ERROR(ZeroVariance);
VCSTK_DEFINE_ERROR(MissingTimepoint);
VCSTK_DEFINE_ERROR(EmptyCohort);
VCSTK_DEFINE_ERROR(AllPatientsSkipped);
VCSTK_DEFINE_ERROR(RegionMismatch);
VCSTK_DEFINE_ERROR(NoPositives);
VCSTK_DEFINE_ERROR(NoNegatives);

// autograd-net
VCSTK_DEFINE_ERROR(ShapeMismatch);
VCSTK_DEFINE_ERROR(NoTape);
VCSTK_DEFINE_ERROR(NonFiniteValue);
VCSTK_DEFINE_ERROR(VersionMismatch);
VCSTK_DEFINE_ERROR(CorruptCheckpoint);

// robust-train
VCSTK_DEFINE_ERROR(MissingGradient);
VCSTK_DEFINE_ERROR(BlockOutOfRange);
VCSTK_DEFINE_ERROR(SingleClassDataset);

// synth-cohort
VCSTK_DEFINE_ERROR(RegionsOverlap);
VCSTK_DEFINE_ERROR(RegionOutOfBounds);

// cli
VCSTK_DEFINE_ERROR(ConfigError);
VCSTK_DEFINE_ERROR(ManifestError);

#undef VCSTK_DEFINE_ERROR

}  // namespace vcstk
