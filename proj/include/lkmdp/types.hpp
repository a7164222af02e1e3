#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lkmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using StateId = int;
using ActionId = int;

// Raised when a family does not provide an operation (e.g. projection onto B).
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised when C ∩ B is empty.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lkmdp
