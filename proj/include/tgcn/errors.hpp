// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tgcn {

/// Base class for every error raised by the library. `kind()` is the stable
/// name reported in the CLI's structured error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define TGCN_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

TGCN_DEFINE_ERROR(InvalidGraph)
TGCN_DEFINE_ERROR(ParseError)
TGCN_DEFINE_ERROR(ShapeError)
TGCN_DEFINE_ERROR(ContractError)
TGCN_DEFINE_ERROR(CheckpointError)
TGCN_DEFINE_ERROR(TrainingDiverged)
TGCN_DEFINE_ERROR(DataError)
TGCN_DEFINE_ERROR(ConfigError)

#undef TGCN_DEFINE_ERROR

}  // namespace tgcn
