#pragma once

#include "m2m/image.hpp"

namespace m2m {

// Deterministic synthetic test scene: smooth ramp background with disks,
// a rectangle, a soft blob and a few step edges. Values stay inside
// [0.15, 0.85] so moderate noise rarely clips.
Image make_phantom(int size = 128);

}  // namespace m2m
