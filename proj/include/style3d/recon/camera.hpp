#pragma once

#include "style3d/camera_pose.hpp"
#include "style3d/tensor.hpp"

namespace style3d::recon {

// Orbit camera in world space (y up). The eye sits at
// radius * (cos(el) sin(az), sin(el), cos(el) cos(az)) and looks at the origin.
struct Camera {
  CameraPose pose;
  Vec3 eye;
  Vec3 forward;
  Vec3 right;
  Vec3 up;
  double tan_half_fov = 0.0;
};

// Throws ValidationError for non-finite values, radius <= 0, fov outside
// (0, 180) or a view direction parallel to the world up axis.
Camera make_camera(const CameraPose& pose);

// One ray per pixel center, row-major from the top-left pixel.
struct Rays {
  Matrix origins;     // P x 3
  Matrix directions;  // P x 3, unit length
  Eigen::VectorXd forward_cos;  // direction . forward, to turn ray length into depth
};
Rays generate_rays(const Camera& cam, int width, int height);

// Pixel coordinates (continuous, origin at the top-left corner) and camera
// depth of a world point.
Eigen::Vector3d project(const Camera& cam, const Vec3& p, int width, int height);

// Six-value pose code used for modulation: sin/cos of elevation and azimuth,
// radius and fov in radians.
Eigen::RowVectorXd pose_code(const CameraPose& pose);

}  // namespace style3d::recon
