#pragma once

#include <stdexcept>
#include <string>

namespace dbfl {

// Base for every error raised by the library. `kind()` is a stable
// machine-readable tag used by the CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DBFL_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

DBFL_DEFINE_ERROR(DimensionMismatch);
DBFL_DEFINE_ERROR(EmptyDataset);
DBFL_DEFINE_ERROR(SignatureMismatch);
DBFL_DEFINE_ERROR(EmptyMemberList);
DBFL_DEFINE_ERROR(MissingLabels);
DBFL_DEFINE_ERROR(NoConnectableDevice);
DBFL_DEFINE_ERROR(NoEligibleHead);
DBFL_DEFINE_ERROR(ParseError);
DBFL_DEFINE_ERROR(SchemaMismatch);
DBFL_DEFINE_ERROR(IndexOutOfRange);
DBFL_DEFINE_ERROR(ConfigError);
DBFL_DEFINE_ERROR(InvalidArgument);

#undef DBFL_DEFINE_ERROR

}  // namespace dbfl
