#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace male {

// Error kinds raised by the library. Each derives from the closest standard
// exception so callers can catch broadly.

struct invalid_argument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

struct invalid_configuration : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct unsupported_dimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct unsupported_operation : std::logic_error {
  using std::logic_error::logic_error;
};

struct resource_limit : std::length_error {
  using std::length_error::length_error;
};

struct precondition_failure : std::logic_error {
  using std::logic_error::logic_error;
};

struct experiment_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine cannot produce a finite result. When the
/// failure is tied to a quadrature node, that node is carried along.
class numeric_failure : public std::runtime_error {
 public:
  explicit numeric_failure(const std::string& what, std::vector<double> node = {})
      : std::runtime_error(what), node_(std::move(node)) {}

  const std::vector<double>& node() const noexcept { return node_; }

 private:
  std::vector<double> node_;
};

}  // namespace male
