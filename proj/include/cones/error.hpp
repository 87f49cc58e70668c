#pragma once

#include <stdexcept>
#include <string>

namespace cones {

// Malformed input file or invalid mesh topology/geometry.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure of a linear solve or violated solver precondition.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An integer program whose feasible set is empty.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cones
