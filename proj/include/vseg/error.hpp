#pragma once

#include <stdexcept>

namespace vseg {

// Malformed or missing input data (files, directory layouts).
struct load_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sample or tensor structure is internally inconsistent (shape mismatch etc).
struct structural_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad flags, inconsistent graph settings, bad enums.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem read/write failure.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given input (e.g. single-class AUC).
struct metric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vseg
