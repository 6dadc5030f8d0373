#pragma once

#include <stdexcept>
#include <string>

namespace cpt {

// Bad key, value, or combination in a run configuration. The CLI maps
// this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A tensor that must be finite contains NaN or infinity.
struct NonFiniteError : std::domain_error {
  using std::domain_error::domain_error;
};

// Training detected divergence (non-finite loss or parameters) and
// stopped. The CLI maps this to exit code 3.
struct NanAbortError : std::runtime_error {
  NanAbortError(const std::string& what, int epoch_, int batch_)
      : std::runtime_error(what), epoch(epoch_), batch(batch_) {}
  int epoch;
  int batch;
};

}  // namespace cpt
