#pragma once

/**
 * @file beam_element.hpp
 * @brief 2-node 3D Timoshenko frame element with a circular cross-section.
 *
 * DOF order per node: ux uy uz rx ry rz (12 DOFs per element).
 */

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "trussvae/errors.hpp"

namespace trussvae {

using Matrix12 = Eigen::Matrix<double, 12, 12>;

struct MaterialParams {
  double youngs = 1.0;
  double poisson = 0.3;

  double shear() const { return youngs / (2.0 * (1.0 + poisson)); }

  void check() const {
    if (!(youngs > 0.0)) throw RangeError("base Young's modulus must be positive");
    if (!(poisson > -1.0 && poisson < 0.5)) throw RangeError("base Poisson ratio must lie in (-1, 0.5)");
  }
};

/// Cowper's shear correction factor for a solid circular section.
inline double cowper_shear_factor(double nu) { return 6.0 * (1.0 + nu) / (7.0 + 6.0 * nu); }

struct BeamSection {
  double area = 0.0;
  double inertia = 0.0;  ///< second moment, same about both principal axes
  double torsion = 0.0;  ///< polar constant J = 2I
  double shear_factor = 0.0;

  static BeamSection circular(double radius, double weight, double nu) {
    const double r2 = radius * radius;
    BeamSection s;
    s.area = weight * std::numbers::pi * r2;
    s.inertia = weight * std::numbers::pi * r2 * r2 / 4.0;
    s.torsion = 2.0 * s.inertia;
    s.shear_factor = cowper_shear_factor(nu);
    return s;
  }
};

/// Stiffness in the local frame (x along the beam).
inline Matrix12 local_beam_stiffness(double length, const BeamSection& sec, const MaterialParams& mat) {
  const double L = length, L2 = L * L, L3 = L2 * L;
  const double E = mat.youngs, G = mat.shear();
  const double phi = 12.0 * E * sec.inertia / (sec.shear_factor * G * sec.area * L2);
  const double b = E * sec.inertia / ((1.0 + phi) * L3);

  Matrix12 k = Matrix12::Zero();
  const double ea = E * sec.area / L;
  k(0, 0) = k(6, 6) = ea;
  k(0, 6) = k(6, 0) = -ea;
  const double gj = G * sec.torsion / L;
  k(3, 3) = k(9, 9) = gj;
  k(3, 9) = k(9, 3) = -gj;

  // bending in the local x-y plane: (uy, rz)
  {
    const int v1 = 1, t1 = 5, v2 = 7, t2 = 11;
    k(v1, v1) = k(v2, v2) = 12.0 * b;
    k(v1, v2) = k(v2, v1) = -12.0 * b;
    k(v1, t1) = k(t1, v1) = k(v1, t2) = k(t2, v1) = 6.0 * L * b;
    k(v2, t1) = k(t1, v2) = k(v2, t2) = k(t2, v2) = -6.0 * L * b;
    k(t1, t1) = k(t2, t2) = (4.0 + phi) * L2 * b;
    k(t1, t2) = k(t2, t1) = (2.0 - phi) * L2 * b;
  }
  // bending in the local x-z plane: (uz, ry), opposite coupling sign
  {
    const int w1 = 2, t1 = 4, w2 = 8, t2 = 10;
    k(w1, w1) = k(w2, w2) = 12.0 * b;
    k(w1, w2) = k(w2, w1) = -12.0 * b;
    k(w1, t1) = k(t1, w1) = k(w1, t2) = k(t2, w1) = -6.0 * L * b;
    k(w2, t1) = k(t1, w2) = k(w2, t2) = k(t2, w2) = 6.0 * L * b;
    k(t1, t1) = k(t2, t2) = (4.0 + phi) * L2 * b;
    k(t1, t2) = k(t2, t1) = (2.0 - phi) * L2 * b;
  }
  return k;
}

/// Rows are the local axes expressed in global coordinates.
inline Eigen::Matrix3d beam_frame(const Eigen::Vector3d& axis) {
  const Eigen::Vector3d ex = axis.normalized();
  Eigen::Vector3d ref = std::abs(ex.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d ey = ref.cross(ex).normalized();
  const Eigen::Vector3d ez = ex.cross(ey);
  Eigen::Matrix3d r;
  r.row(0) = ex;
  r.row(1) = ey;
  r.row(2) = ez;
  return r;
}

/**
 * Global 12x12 stiffness of a beam from p_i to p_j. The section is scaled
 * by `weight`, the share of the beam that belongs to the cell.
 */
inline Matrix12 element_stiffness(const Eigen::Vector3d& p_i, const Eigen::Vector3d& p_j, double radius,
                                  double weight, const MaterialParams& mat) {
  const Eigen::Vector3d axis = p_j - p_i;
  const double length = axis.norm();
  if (!(length > 1e-9)) throw DegenerateError("zero-length beam element");
  if (!(radius > 0.0)) throw RangeError("beam radius must be positive");

  const Matrix12 k_local = local_beam_stiffness(length, BeamSection::circular(radius, weight, mat.poisson), mat);
  const Eigen::Matrix3d r = beam_frame(axis);
  Matrix12 t = Matrix12::Zero();
  for (int blk = 0; blk < 4; ++blk) t.block<3, 3>(3 * blk, 3 * blk) = r;
  Matrix12 k = t.transpose() * k_local * t;
  return 0.5 * (k + k.transpose());
}

}  // namespace trussvae
