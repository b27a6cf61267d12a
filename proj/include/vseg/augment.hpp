#pragma once

#include <string>
#include <vector>

#include "vseg/config.hpp"
#include "vseg/dataio.hpp"

namespace vseg {

// One deterministic geometric transform. mirror composes a horizontal flip
// AFTER the primary transform, giving the rotation*flip plan entries their
// own spec without a nested composition type.
struct TransformSpec {
  enum class Kind { identity, rotate, flip_h, flip_v, scale };
  Kind kind = Kind::identity;
  double angle = 0.0;   // rotate only, degrees in (0, 360)
  double factor = 1.0;  // scale only, > 0
  bool mirror = false;

  std::string name() const;
};

struct AugmentPlan {
  Dataset dataset = Dataset::SYNTHETIC;
  std::string version = "v1";
  std::vector<TransformSpec> transforms;
};

// Fixed per-dataset plans hitting the exact expansion factors:
//   DRIVE 13, CHASE_DB1 16, STARE 40, SYNTHETIC 48 (every 15 degrees, plain
//   and mirrored). A shared 12-element core (identity, right-angle rotations,
// both flips, the two scales, and four rotation*flip entries) underlies DRIVE
// and CHASE_DB1.
AugmentPlan default_plan(Dataset dataset);

// Image resampled bilinearly, truth/FOV by nearest neighbour (stays binary);
// output frame equals the input frame, uncovered pixels are 0/outside-FOV.
FundusSample apply_transform(const FundusSample& s, const TransformSpec& t);

// Sample-major, transform-minor order; ids get the transform index appended.
std::vector<FundusSample> augment_set(const std::vector<FundusSample>& split,
                                      const AugmentPlan& plan);

// CSV rendering for the augment-plan command: index,kind,angle,factor,mirror.
std::string plan_csv(const AugmentPlan& plan);

}  // namespace vseg
