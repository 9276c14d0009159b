#pragma once

#include <stdexcept>

namespace mrin {

/// File could not be opened, read or written.
class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mrin
