#include "style3d/recon/camera.hpp"

#include "style3d/error.hpp"

#include <cmath>
#include <numbers>

namespace style3d::recon {
namespace {
double rad(double deg) { return deg * std::numbers::pi / 180.0; }
}  // namespace

Camera make_camera(const CameraPose& pose) {
  if (!std::isfinite(pose.elevation_deg) || !std::isfinite(pose.azimuth_deg) || !std::isfinite(pose.radius) ||
      !std::isfinite(pose.fov_deg)) {
    throw ValidationError("camera pose has non-finite values");
  }
  if (!(pose.radius > 0.0)) throw ValidationError("camera radius must be positive");
  if (!(pose.fov_deg > 0.0 && pose.fov_deg < 180.0)) throw ValidationError("camera fov must be in (0, 180) degrees");
  Camera cam;
  cam.pose = pose;
  const double el = rad(pose.elevation_deg), az = rad(pose.azimuth_deg);
  cam.eye = pose.radius * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
  cam.forward = -cam.eye.normalized();
  const Vec3 r = cam.forward.cross(Vec3::UnitY());
  if (r.norm() < 1e-9) throw ValidationError("camera looks straight along the up axis");
  cam.right = r.normalized();
  cam.up = cam.right.cross(cam.forward);
  cam.tan_half_fov = std::tan(rad(pose.fov_deg) / 2.0);
  return cam;
}

Rays generate_rays(const Camera& cam, int width, int height) {
  if (width < 1 || height < 1) throw ValidationError("ray raster must be at least 1x1");
  const Eigen::Index n = static_cast<Eigen::Index>(width) * height;
  Rays rays;
  rays.origins.resize(n, 3);
  rays.directions.resize(n, 3);
  rays.forward_cos.resize(n);
  const double aspect = static_cast<double>(width) / height;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Index i = static_cast<Eigen::Index>(y) * width + x;
      const double u = (2.0 * (x + 0.5) / width - 1.0) * cam.tan_half_fov * aspect;
      const double v = (1.0 - 2.0 * (y + 0.5) / height) * cam.tan_half_fov;
      const Vec3 d = (cam.forward + u * cam.right + v * cam.up).normalized();
      rays.origins.row(i) = cam.eye.transpose();
      rays.directions.row(i) = d.transpose();
      rays.forward_cos(i) = d.dot(cam.forward);
    }
  return rays;
}

Eigen::Vector3d project(const Camera& cam, const Vec3& p, int width, int height) {
  const Vec3 rel = p - cam.eye;
  const double z = rel.dot(cam.forward);
  const double aspect = static_cast<double>(width) / height;
  const double u = rel.dot(cam.right) / (z * cam.tan_half_fov * aspect);
  const double v = rel.dot(cam.up) / (z * cam.tan_half_fov);
  return Eigen::Vector3d((u + 1.0) * 0.5 * width, (1.0 - v) * 0.5 * height, z);
}

Eigen::RowVectorXd pose_code(const CameraPose& pose) {
  const double el = rad(pose.elevation_deg), az = rad(pose.azimuth_deg);
  Eigen::RowVectorXd c(6);
  c << std::sin(el), std::cos(el), std::sin(az), std::cos(az), pose.radius, rad(pose.fov_deg);
  return c;
}

}  // namespace style3d::recon
