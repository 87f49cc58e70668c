#pragma once

#include <string>
#include <vector>

#include "cones/mesh.hpp"
#include "cones/yamabe.hpp"

namespace cones {

// Integer range N_b for every multiplier.
struct Bounds {
  int lo = -1;
  int hi = 1;
};

// Mutable pipeline state shared by the angle, relocation and count steps.
// The mesh and the Yamabe system must outlive it.
struct State {
  const Mesh* mesh = nullptr;
  const YamabeSystem* system = nullptr;
  ReducedMap map;
  ConeState cones;
  Evaluation eval;
  Bounds bounds;
  int target_sum = 0;  // used only when system->constrains_sum()

  State(const Mesh& m, const YamabeSystem& sys, Bounds b, int target)
      : mesh(&m), system(&sys), map(sys), bounds(b), target_sum(target) {
    cones.pin = sys.pin();
    refresh();
  }

  // Re-syncs the column cache and recomputes u, a and E.
  void refresh() {
    map.sync(cones);
    eval = map.evaluate(cones);
  }

  double E() const { return eval.E; }

  // Sum and bound constraints of the current multipliers.
  bool z_feasible() const {
    for (const auto& c : cones.cones)
      if (c.z < bounds.lo || c.z > bounds.hi) return false;
    return !system->constrains_sum() || cones.sum_z() == target_sum;
  }
};

}  // namespace cones
