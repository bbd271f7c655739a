#pragma once

#include <stdexcept>
#include <string>

namespace ssmi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SSMI_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

SSMI_DEFINE_ERROR(InvalidArgument);
SSMI_DEFINE_ERROR(DegeneratePivot);
SSMI_DEFINE_ERROR(InvalidClass);
SSMI_DEFINE_ERROR(ClassCountMismatch);
SSMI_DEFINE_ERROR(OriginOutOfBounds);
SSMI_DEFINE_ERROR(IndexOutOfRange);
SSMI_DEFINE_ERROR(EmptyRay);
SSMI_DEFINE_ERROR(ScaleExceeded);
SSMI_DEFINE_ERROR(NoFrontiers);
SSMI_DEFINE_ERROR(Unreachable);
SSMI_DEFINE_ERROR(AllUnreachable);
SSMI_DEFINE_ERROR(BadDims);
SSMI_DEFINE_ERROR(PoseInObstacle);
SSMI_DEFINE_ERROR(FormatError);

#undef SSMI_DEFINE_ERROR

}  // namespace ssmi
