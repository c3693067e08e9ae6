// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ivmap {

/// Base class of every error raised by the library. The CLI prints what() as
/// a one-line diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define IVMAP_DEFINE_ERROR(Name)              \
  class Name : public Error {                 \
   public:                                    \
    explicit Name(const std::string& what)    \
        : Error(#Name ": " + what) {}         \
  }

IVMAP_DEFINE_ERROR(ShapeMismatch);
IVMAP_DEFINE_ERROR(DomainError);
IVMAP_DEFINE_ERROR(MalformedImage);
IVMAP_DEFINE_ERROR(SingularSystem);
IVMAP_DEFINE_ERROR(NonFiniteLoss);
IVMAP_DEFINE_ERROR(DegenerateData);
IVMAP_DEFINE_ERROR(IoError);
IVMAP_DEFINE_ERROR(CorruptDataset);
IVMAP_DEFINE_ERROR(VersionMismatch);
IVMAP_DEFINE_ERROR(CorruptCheckpoint);
IVMAP_DEFINE_ERROR(ConfigError);

#undef IVMAP_DEFINE_ERROR

}  // namespace ivmap
