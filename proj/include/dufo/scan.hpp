#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

#include "dufo/errors.hpp"

namespace dufo {

/// Rigid sensor-to-world transform.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p_sensor) const {
    return rotation * p_sensor + translation;
  }

  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p_world) const {
    return rotation.conjugate() * (p_world - translation);
  }

  bool finite() const {
    return translation.allFinite() && rotation.coeffs().allFinite();
  }

  /// Throws unless finite and |q| = 1 within tolerance.
  void validate(double quat_tolerance = 1e-6) const {
    if (!finite()) throw InvalidInputError("pose: non-finite values");
    if (std::abs(rotation.norm() - 1.0) > quat_tolerance)
      throw InvalidInputError("pose: quaternion not normalized");
  }
};

/// One scan: sensor-frame points plus the pose that produced them. Point
/// order is preserved end-to-end so labels can align by index.
struct PosedScan {
  std::uint64_t scan_id = 0;
  Pose pose;
  std::vector<Eigen::Vector3d> points;  ///< sensor frame, meters
  /// Ground-truth labels when known: 0 static, 1 dynamic. Either empty or
  /// the same length as points.
  std::vector<std::uint8_t> gt_labels;
};

}  // namespace dufo
