#pragma once

#include <stdexcept>
#include <string>

namespace spheremv {

// Exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kDegenerate = 3,
  kNoResult = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const = 0;

  // Pipeline stage that raised the error, filled in by the pipeline driver.
  const std::string& stage() const { return stage_; }
  void set_stage(std::string stage) {
    if (stage_.empty()) stage_ = std::move(stage);
  }

 private:
  std::string stage_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kValidation; }
};

class GeometryError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kDegenerate; }
};

class NoResultError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kNoResult; }
};

#define SPHEREMV_DEFINE_ERROR(Name, Base) \
  class Name : public Base {              \
   public:                                \
    using Base::Base;                     \
  }

SPHEREMV_DEFINE_ERROR(ParseError, ValidationError);
SPHEREMV_DEFINE_ERROR(InvalidArgument, ValidationError);
SPHEREMV_DEFINE_ERROR(InvalidCovariance, ValidationError);
SPHEREMV_DEFINE_ERROR(InvalidAnchor, ValidationError);
SPHEREMV_DEFINE_ERROR(UnknownAnchor, ValidationError);
SPHEREMV_DEFINE_ERROR(EmptyInput, ValidationError);
SPHEREMV_DEFINE_ERROR(ConfigInfeasible, ValidationError);

SPHEREMV_DEFINE_ERROR(DegenerateProjection, GeometryError);
SPHEREMV_DEFINE_ERROR(DegenerateGeometry, GeometryError);

SPHEREMV_DEFINE_ERROR(NoSharedPoints, NoResultError);
SPHEREMV_DEFINE_ERROR(NoAdmissiblePair, NoResultError);

#undef SPHEREMV_DEFINE_ERROR

}  // namespace spheremv
