#include "style3d/camera_pose.hpp"

namespace style3d {

const std::array<CameraPose, 6>& six_view_poses() {
  static const std::array<CameraPose, 6> poses = {{
      {20.0, 30.0, 2.5, 30.0},
      {-10.0, 90.0, 2.5, 30.0},
      {20.0, 150.0, 2.5, 30.0},
      {-10.0, 210.0, 2.5, 30.0},
      {20.0, 270.0, 2.5, 30.0},
      {-10.0, 330.0, 2.5, 30.0},
  }};
  return poses;
}

}  // namespace style3d
