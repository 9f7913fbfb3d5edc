#pragma once

#include <stdexcept>
#include <string>

namespace bures {

// Malformed numeric input: non-finite entries, indefinite covariances,
// out-of-range configuration values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Frame-to-frame Gaussian counts disagree under fixed-index correspondence.
class CorrespondenceError : public std::runtime_error {
 public:
  CorrespondenceError(const std::string& what, std::size_t frame)
      : std::runtime_error(what), frame_(frame) {}
  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

// A metric has no valid samples to average over.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace bures
