#pragma once

#include <stdexcept>
#include <string>

namespace lpssl {

enum class ErrorKind {
  // configuration
  InvalidConfig,
  AlphaOutOfRange,
  // data
  EmptyCorpus,
  LabelOutOfRange,
  EmptySplit,
  FileUnreadable,
  EmptyFile,
  DimensionMismatch,
  KTooLarge,
  NoLabeledPoints,
  SingleClassEval,
  MissingCheckpoint,
  // numerical
  NotConverged,
  DivergedLoss,
};

const char* to_string(ErrorKind kind) noexcept;

/// Broad failure category; the CLI maps it onto its exit code.
enum class ErrorCategory { Config, Data, Numerical };

ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::FileUnreadable: return "FileUnreadable";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::NoLabeledPoints: return "NoLabeledPoints";
    case ErrorKind::SingleClassEval: return "SingleClassEval";
    case ErrorKind::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
  }
  return "Unknown";
}

inline ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::AlphaOutOfRange:
      return ErrorCategory::Config;
    case ErrorKind::NotConverged:
    case ErrorKind::DivergedLoss:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace lpssl
