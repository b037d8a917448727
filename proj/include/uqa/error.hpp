#pragma once

#include <stdexcept>
#include <string>

namespace uqa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented schema, precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A provider could not deliver: transport failure, unknown prompt, missing capability.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// A statistic is undefined for the data at hand (rank deficiency, too few rows).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

// A measure cannot be computed honestly from these inputs, e.g. a nucleus over
// truncated data. Callers turn this into an availability flag.
class Unavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace uqa
