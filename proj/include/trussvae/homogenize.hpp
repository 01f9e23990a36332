#pragma once

/**
 * @file homogenize.hpp
 * @brief Effective stiffness of a periodic beam network.
 *
 * Nodal displacements are split into an affine part and a periodic
 * fluctuation, u_i = eps * x_i + w(class(i)), with rotations periodic.
 * Nodes on opposite faces of [-1,1]^3 share one fluctuation (master-slave
 * elimination). Translations of one master are pinned to remove the rigid
 * modes; rotations stay free since a uniform rotation of every joint is
 * resisted by the beams. Effective stiffness follows from the energy of the
 * six unit-strain solutions, C_kl = u_k^T K u_l / V.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trussvae/beam_element.hpp"
#include "trussvae/elastic.hpp"
#include "trussvae/unit_cell.hpp"

namespace trussvae {

namespace detail {

/// Voigt strain vector (engineering shear) as a 3x3 tensor.
inline Eigen::Matrix3d unit_strain(int k) {
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
  if (k < 3) {
    e(k, k) = 1.0;
  } else {
    const int a = k == 3 ? 1 : (k == 4 ? 2 : 0);
    const int b = k == 3 ? 2 : (k == 4 ? 0 : 1);
    e(a, b) = e(b, a) = 0.5;
  }
  return e;
}

/// Periodic class of every node: coordinates at +1 are identified with -1.
inline std::vector<int> periodic_classes(const UnitCell& cell, int* count) {
  std::map<std::array<long long, 3>, int> ids;
  std::vector<int> cls(cell.nodes.size());
  for (std::size_t n = 0; n < cell.nodes.size(); ++n) {
    Vec3 p = cell.nodes[n];
    for (int a = 0; a < 3; ++a)
      if (std::abs(p[a] - 1.0) < 1e-9) p[a] = -1.0;
    auto [it, inserted] = ids.emplace(quantize(p), int(ids.size()));
    cls[n] = it->second;
  }
  *count = int(ids.size());
  return cls;
}

}  // namespace detail

struct HomogenizationResult {
  StiffnessRecord stiffness;
  Matrix6 voigt_raw;       ///< before zeroing symmetry-forbidden couplings
  double max_coupling = 0.0;  ///< largest forbidden coupling relative to max|C|
};

inline HomogenizationResult homogenize_full(const UnitCell& cell, const MaterialParams& mat) {
  mat.check();
  if (!(cell.radius > 0.0)) throw RangeError("unit cell radius not set");
  if (cell.beams.empty()) throw DegenerateError("unit cell has no beams");

  int nclass = 0;
  const std::vector<int> cls = detail::periodic_classes(cell, &nclass);
  // DOF index of class c component d, or -1 for the pinned translations of class 0.
  auto dof = [](int c, int d) { return c == 0 ? (d < 3 ? -1 : d - 3) : 6 * c - 3 + d; };
  const int n = 6 * nclass - 3;

  std::vector<Matrix12> ke(cell.beams.size());
  std::vector<std::array<int, 12>> maps(cell.beams.size());
  std::vector<Eigen::Matrix<double, 12, 6>> affine(cell.beams.size());

  std::array<Eigen::Matrix3d, 6> strains;
  for (int k = 0; k < 6; ++k) strains[k] = detail::unit_strain(k);

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, 6);
  for (std::size_t e = 0; e < cell.beams.size(); ++e) {
    const CellBeam& b = cell.beams[e];
    ke[e] = element_stiffness(cell.nodes[b.i], cell.nodes[b.j], cell.radius, b.weight, mat);
    for (int d = 0; d < 6; ++d) {
      maps[e][d] = dof(cls[b.i], d);
      maps[e][6 + d] = dof(cls[b.j], d);
    }
    affine[e].setZero();
    for (int k = 0; k < 6; ++k) {
      affine[e].col(k).segment<3>(0) = strains[k] * cell.nodes[b.i];
      affine[e].col(k).segment<3>(6) = strains[k] * cell.nodes[b.j];
    }
    const Eigen::Matrix<double, 12, 6> load = ke[e] * affine[e];
    for (int r = 0; r < 12; ++r) {
      const int gr = maps[e][r];
      if (gr < 0) continue;
      F.row(gr) -= load.row(r);
      for (int c = 0; c < 12; ++c) {
        const int gc = maps[e][c];
        if (gc >= 0) K(gr, gc) += ke[e](r, c);
      }
    }
  }

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, 6);
  if (n > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) throw MechanismError("periodic stiffness matrix is singular");
    const Eigen::VectorXd diag = Eigen::MatrixXd(llt.matrixL()).diagonal();
    if (diag.minCoeff() * diag.minCoeff() < 1e-13 * diag.maxCoeff() * diag.maxCoeff())
      throw MechanismError("periodic stiffness matrix is numerically singular");
    W = llt.solve(F);
  }

  Matrix6 c = Matrix6::Zero();
  for (std::size_t e = 0; e < cell.beams.size(); ++e) {
    Eigen::Matrix<double, 12, 6> u = affine[e];
    for (int r = 0; r < 12; ++r)
      if (maps[e][r] >= 0) u.row(r) += W.row(maps[e][r]);
    c += u.transpose() * ke[e] * u;
  }
  c /= kCellVolume;
  c = 0.5 * (c + c.transpose());
  if (!c.allFinite()) throw NumericError("non-finite homogenized stiffness");

  HomogenizationResult res;
  res.voigt_raw = c;
  const double cmax = c.cwiseAbs().maxCoeff();
  Matrix6 ortho = c;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const bool allowed = (i < 3 && j < 3) || i == j;
      if (allowed) continue;
      res.max_coupling = std::max(res.max_coupling, std::abs(c(i, j)) / cmax);
      ortho(i, j) = 0.0;
    }
  if (res.max_coupling >= 1e-8)
    throw SymmetryViolation("orthotropy-forbidden coupling " + std::to_string(res.max_coupling) + " x max|C|");
  res.stiffness = StiffnessRecord::from_voigt(ortho);
  return res;
}

/// Nine orthotropic stiffness components of a sized unit cell.
inline StiffnessRecord homogenize_stiffness(const UnitCell& cell, const MaterialParams& mat) {
  return homogenize_full(cell, mat).stiffness;
}

inline StiffnessRecord homogenize_graph(const TrussGraph& g, double rho, const MaterialParams& mat) {
  return homogenize_stiffness(sized_cell(g, rho), mat);
}

struct SurfaceSample {
  double theta = 0.0;  ///< polar angle from e3
  double phi = 0.0;    ///< azimuth from e1
  Eigen::Vector3d direction;
  double modulus = 0.0;
};

/// E(d) on a regular (theta, phi) grid, both endpoints included.
inline std::vector<SurfaceSample> sample_elastic_surface(const StiffnessRecord& rec, int n_theta, int n_phi) {
  if (n_theta < 2 || n_phi < 2) throw RangeError("surface grid needs at least 2x2 points");
  std::vector<SurfaceSample> out;
  out.reserve(std::size_t(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = M_PI * i / (n_theta - 1);
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * M_PI * j / (n_phi - 1);
      SurfaceSample s;
      s.theta = theta;
      s.phi = phi;
      s.direction = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
      s.modulus = directional_modulus(rec, s.direction).value;
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace trussvae
