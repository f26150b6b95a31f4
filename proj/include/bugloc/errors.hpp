#ifndef BUGLOC_ERRORS_HPP
#define BUGLOC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bugloc {

// All toolkit errors derive from Error so the CLI can map them to a
// machine-readable {kind, message} payload.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define BUGLOC_DEFINE_ERROR(Name)                         \
  class Name : public Error {                             \
  public:                                                 \
    explicit Name(const std::string& msg)                 \
        : Error(#Name, msg) {}                            \
  }

BUGLOC_DEFINE_ERROR(ParseError);
BUGLOC_DEFINE_ERROR(SchemaError);
BUGLOC_DEFINE_ERROR(ValueError);
BUGLOC_DEFINE_ERROR(ManifestError);
BUGLOC_DEFINE_ERROR(LeakageError);
BUGLOC_DEFINE_ERROR(LengthMismatch);
BUGLOC_DEFINE_ERROR(InsufficientData);
BUGLOC_DEFINE_ERROR(ShapeMismatch);
BUGLOC_DEFINE_ERROR(DegenerateData);
BUGLOC_DEFINE_ERROR(NonFiniteLoss);
BUGLOC_DEFINE_ERROR(MissingWorkload);
BUGLOC_DEFINE_ERROR(UnknownWorkload);
BUGLOC_DEFINE_ERROR(EmptyInput);
BUGLOC_DEFINE_ERROR(NoBugFreeData);
BUGLOC_DEFINE_ERROR(BadLength);
BUGLOC_DEFINE_ERROR(DuplicateWorkload);
BUGLOC_DEFINE_ERROR(InsufficientSamples);
BUGLOC_DEFINE_ERROR(AllZeroScores);
BUGLOC_DEFINE_ERROR(KeyMismatch);
BUGLOC_DEFINE_ERROR(ConfigError);
BUGLOC_DEFINE_ERROR(NoTestData);
BUGLOC_DEFINE_ERROR(GridError);
BUGLOC_DEFINE_ERROR(MissingClass);
BUGLOC_DEFINE_ERROR(IoError);

#undef BUGLOC_DEFINE_ERROR

}  // namespace bugloc

#endif
