#pragma once

/**
 * @file elastic.hpp
 * @brief Orthotropic stiffness records and the elastic metrics derived from
 *        them: directional Young's modulus, engineering constants, Voigt and
 *        Reuss averages and the universal anisotropy index.
 *
 * Voigt matrices use engineering shear strains (C44 = C2323, S44 = 1/G23).
 * Tensor factors are only applied when expanding to fourth-order tensors.
 */

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "trussvae/errors.hpp"

namespace trussvae {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// (C1111, C1122, C1133, C2222, C2233, C3333, C2323, C3131, C1212)
struct StiffnessRecord {
  std::array<double, 9> s{};

  double c11() const { return s[0]; }
  double c12() const { return s[1]; }
  double c13() const { return s[2]; }
  double c22() const { return s[3]; }
  double c23() const { return s[4]; }
  double c33() const { return s[5]; }
  double c44() const { return s[6]; }
  double c55() const { return s[7]; }
  double c66() const { return s[8]; }

  Matrix6 voigt() const {
    Matrix6 c = Matrix6::Zero();
    c(0, 0) = s[0];
    c(0, 1) = c(1, 0) = s[1];
    c(0, 2) = c(2, 0) = s[2];
    c(1, 1) = s[3];
    c(1, 2) = c(2, 1) = s[4];
    c(2, 2) = s[5];
    c(3, 3) = s[6];
    c(4, 4) = s[7];
    c(5, 5) = s[8];
    return c;
  }

  Eigen::Matrix3d normal_block() const { return voigt().topLeftCorner<3, 3>(); }

  static StiffnessRecord from_voigt(const Matrix6& c) {
    return {{c(0, 0), c(0, 1), c(0, 2), c(1, 1), c(1, 2), c(2, 2), c(3, 3), c(4, 4), c(5, 5)}};
  }

  /// Isotropic stiffness for Young's modulus e and Poisson ratio nu.
  static StiffnessRecord isotropic(double e, double nu) {
    const double lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    const double mu = e / (2.0 * (1.0 + nu));
    return {{lam + 2 * mu, lam, lam, lam + 2 * mu, lam, lam + 2 * mu, mu, mu, mu}};
  }

  static StiffnessRecord cubic(double c11, double c12, double c44) {
    return {{c11, c12, c12, c11, c12, c11, c44, c44, c44}};
  }
};

inline bool is_spd(const Matrix6& c) {
  if (!c.allFinite()) return false;
  Eigen::LLT<Matrix6> llt(c);
  return llt.info() == Eigen::Success;
}

inline Matrix6 compliance(const StiffnessRecord& rec) {
  const Matrix6 c = rec.voigt();
  Eigen::LLT<Matrix6> llt(c);
  if (!c.allFinite() || llt.info() != Eigen::Success) throw NotPositiveDefinite("stiffness is not positive definite");
  return llt.solve(Matrix6::Identity());
}

namespace detail {

inline constexpr int kVoigtIndex[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};

}  // namespace detail

/// Fourth-order compliance tensor, S_ijkl, from engineering-shear Voigt compliance.
inline std::array<double, 81> compliance_tensor(const Matrix6& s_voigt) {
  std::array<double, 81> t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const int p = detail::kVoigtIndex[i][j], q = detail::kVoigtIndex[k][l];
          const double f = (p >= 3 ? 0.5 : 1.0) * (q >= 3 ? 0.5 : 1.0);
          t[((i * 3 + j) * 3 + k) * 3 + l] = f * s_voigt(p, q);
        }
  return t;
}

struct DirectionalModulus {
  double value = 0.0;
  bool normalized = false;  ///< the direction was rescaled to unit length
};

/// E(d) = 1 / (S_ijkl d_i d_j d_k d_l).
inline DirectionalModulus directional_modulus(const StiffnessRecord& rec, Eigen::Vector3d d) {
  DirectionalModulus out;
  const double n = d.norm();
  if (!(n > 0.0)) throw RangeError("direction must be nonzero");
  if (std::abs(n - 1.0) > 1e-9) {
    d /= n;
    out.normalized = true;
  }
  const auto t = compliance_tensor(compliance(rec));
  double sum = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) sum += t[((i * 3 + j) * 3 + k) * 3 + l] * d[i] * d[j] * d[k] * d[l];
  out.value = 1.0 / sum;
  return out;
}

struct ElasticMetrics {
  std::array<double, 3> youngs{};      ///< E11, E22, E33
  std::array<double, 3> shear{};       ///< G23, G31, G12
  std::array<std::array<double, 3>, 3> poisson{};  ///< poisson[i][j] = nu_ij = -eps_j / eps_i, diagonal unused
  double bulk_voigt = 0.0;
  double shear_voigt = 0.0;
  double bulk_reuss = 0.0;
  double shear_reuss = 0.0;
  double anisotropy = 0.0;  ///< universal anisotropy index A^U

  double nu(int i, int j) const { return poisson[i - 1][j - 1]; }
};

/// E_ii, G_ij and nu_ij (uniaxial stress along i, strain response along j).
inline ElasticMetrics engineering_constants(const StiffnessRecord& rec) {
  const Eigen::Matrix3d n = rec.normal_block();
  Eigen::LLT<Eigen::Matrix3d> llt(n);
  if (!n.allFinite() || llt.info() != Eigen::Success) throw NotPositiveDefinite("normal stiffness block is not positive definite");
  const Eigen::Matrix3d s = llt.solve(Eigen::Matrix3d::Identity());
  ElasticMetrics m;
  for (int i = 0; i < 3; ++i) {
    m.youngs[i] = 1.0 / s(i, i);
    for (int j = 0; j < 3; ++j) m.poisson[i][j] = i == j ? 0.0 : -s(i, j) / s(i, i);
  }
  m.shear = {rec.c44(), rec.c55(), rec.c66()};
  return m;
}

struct PolycrystalAverages {
  double bulk_voigt = 0.0;
  double shear_voigt = 0.0;
  double bulk_reuss = 0.0;
  double shear_reuss = 0.0;
  double anisotropy = 0.0;
};

inline double bulk_voigt(const StiffnessRecord& r) {
  return ((r.c11() + r.c22() + r.c33()) + 2.0 * (r.c12() + r.c13() + r.c23())) / 9.0;
}

inline double shear_voigt(const StiffnessRecord& r) {
  return ((r.c11() + r.c22() + r.c33()) - (r.c12() + r.c13() + r.c23()) + 3.0 * (r.c44() + r.c55() + r.c66())) / 15.0;
}

inline PolycrystalAverages polycrystal_averages(const StiffnessRecord& rec) {
  const Matrix6 s = compliance(rec);
  PolycrystalAverages a;
  a.bulk_voigt = bulk_voigt(rec);
  a.shear_voigt = shear_voigt(rec);
  a.bulk_reuss = 1.0 / ((s(0, 0) + s(1, 1) + s(2, 2)) + 2.0 * (s(0, 1) + s(0, 2) + s(1, 2)));
  a.shear_reuss = 15.0 / (4.0 * (s(0, 0) + s(1, 1) + s(2, 2)) - 4.0 * (s(0, 1) + s(0, 2) + s(1, 2)) +
                          3.0 * (s(3, 3) + s(4, 4) + s(5, 5)));
  a.anisotropy = 5.0 * a.shear_voigt / a.shear_reuss + a.bulk_voigt / a.bulk_reuss - 6.0;
  return a;
}

inline ElasticMetrics elastic_metrics(const StiffnessRecord& rec) {
  ElasticMetrics m = engineering_constants(rec);
  const PolycrystalAverages a = polycrystal_averages(rec);
  m.bulk_voigt = a.bulk_voigt;
  m.shear_voigt = a.shear_voigt;
  m.bulk_reuss = a.bulk_reuss;
  m.shear_reuss = a.shear_reuss;
  m.anisotropy = a.anisotropy;
  return m;
}

}  // namespace trussvae
