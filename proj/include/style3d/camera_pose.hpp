#pragma once

#include <array>

namespace style3d {

// Orbit camera looking at the origin. Intrinsics are a square pinhole with the
// given vertical field of view; the pixel size comes from the raster it renders.
struct CameraPose {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  double radius = 2.5;
  double fov_deg = 30.0;

  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

// Fixed six-view ring of the multi-view backend: azimuth 30..330 in 60 degree
// steps, elevation alternating +20 / -10 degrees.
const std::array<CameraPose, 6>& six_view_poses();

}  // namespace style3d
