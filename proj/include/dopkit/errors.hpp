#pragma once

#include <stdexcept>
#include <string>

namespace dopkit {

// Base of every error thrown by the toolkit.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// --- plan parsing / validation -------------------------------------------
struct MalformedDocument : Error {
  using Error::Error;
};
struct DanglingChild : Error {
  using Error::Error;
};
struct CycleDetected : Error {
  using Error::Error;
};
struct NegativeEstimate : Error {
  using Error::Error;
};
struct UnknownMode : Error {
  using Error::Error;
};
struct DuplicateNodeId : Error {
  using Error::Error;
};
struct MultipleParents : Error {
  using Error::Error;
};
struct UnreachableNode : Error {
  using Error::Error;
};

// --- featurization ---------------------------------------------------------
struct EmptyCorpus : Error {
  using Error::Error;
};
struct InvalidDop : Error {
  using Error::Error;
};

// --- models ------------------------------------------------------------------
struct EmptyDataset : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct NonFiniteTarget : Error {
  using Error::Error;
};
struct InvalidHyperparameter : Error {
  using Error::Error;
};
struct TooFewPointsForFolds : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct CorruptModel : Error {
  using Error::Error;
};

// --- metrics -----------------------------------------------------------------
struct IncompleteGrid : Error {
  using Error::Error;
};
struct UnknownPlan : Error {
  using Error::Error;
};
struct MissingBaselineDop : Error {
  using Error::Error;
};
struct PredictedBaselineZero : Error {
  using Error::Error;
};
struct EmptyValues : Error {
  using Error::Error;
};

// --- selection ----------------------------------------------------------------
struct EmptyDopSet : Error {
  using Error::Error;
};
struct EmptyWorkload : Error {
  using Error::Error;
};
struct MissingBaseline : Error {
  using Error::Error;
};
struct NonPositiveLatency : Error {
  using Error::Error;
};

// --- harness -------------------------------------------------------------------
struct MissingTemplateIds : Error {
  using Error::Error;
};
struct MissingCorpusIds : Error {
  using Error::Error;
};
struct TooFewTemplates : Error {
  using Error::Error;
};

// --- synth -----------------------------------------------------------------------
struct InvalidSpec : Error {
  using Error::Error;
};

}  // namespace dopkit
