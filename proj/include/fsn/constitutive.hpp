#pragma once

// Constitutive laws of the FSN: power-law creep, the phonon/phason effective
// stress and yield surface, incremental plastic flow and the total
// (nonlinear elastic) deformation relation.

#include <array>

#include <Eigen/Core>

namespace fsn::constitutive {

using Matrix3 = Eigen::Matrix3d;

/// Symmetric second-order tensor (phonon stress s_ij or strain eps_ij).
/// Construction symmetrises its argument, so entry(i,j) == entry(j,i) exactly.
class PhononTensor {
 public:
  PhononTensor() : m_(Matrix3::Zero()) {}
  explicit PhononTensor(const Matrix3& m) : m_(0.5 * (m + m.transpose())) {}
  static PhononTensor diagonal(double a, double b, double c);

  const Matrix3& matrix() const noexcept { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return (m_(0, 0) + m_(1, 1)) + m_(2, 2); }
  /// Exactly traceless in floating point: the last diagonal entry is set to
  /// minus the sum of the other two.
  PhononTensor deviator() const;
  double contract(const PhononTensor& other) const { return m_.cwiseProduct(other.m_).sum(); }

  PhononTensor operator+(const PhononTensor& o) const { return PhononTensor(m_ + o.m_); }
  PhononTensor operator-(const PhononTensor& o) const { return PhononTensor(m_ - o.m_); }
  PhononTensor operator*(double f) const { return PhononTensor(m_ * f); }
  PhononTensor& operator+=(const PhononTensor& o);

 private:
  Matrix3 m_;
};

/// General second-order tensor (phason stress K_ij or strain w_ij).
/// Throws ValidationError on non-finite entries.
class PhasonTensor {
 public:
  PhasonTensor() : m_(Matrix3::Zero()) {}
  explicit PhasonTensor(const Matrix3& m);

  const Matrix3& matrix() const noexcept { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return (m_(0, 0) + m_(1, 1)) + m_(2, 2); }
  double norm() const { return m_.norm(); }
  PhasonTensor deviator() const;

  PhasonTensor operator+(const PhasonTensor& o) const { return PhasonTensor(m_ + o.m_); }
  PhasonTensor operator-(const PhasonTensor& o) const { return PhasonTensor(m_ - o.m_); }
  PhasonTensor operator*(double f) const { return PhasonTensor(m_ * f); }
  PhasonTensor& operator+=(const PhasonTensor& o);

 private:
  Matrix3 m_;
};

struct StressState {
  PhononTensor phonon;
  PhasonTensor phason;
};

struct StrainState {
  PhononTensor phonon;
  PhasonTensor phason;
};

/// Row-major 9-element form used by JSON outputs.
std::array<double, 9> row_major(const Matrix3& m);

enum class CreepOrientation { as_printed, inverted };

struct CreepParams {
  double B = 1.0;      // rate scale per unit of time exposition
  double m = 1.0;      // exponent
  double s_hat = 1.0;  // reference stress
  CreepOrientation orientation = CreepOrientation::as_printed;

  void validate() const;
};

enum class YieldMode { perfect, linear_hardening };

struct YieldModel {
  YieldMode mode = YieldMode::perfect;
  double s_y = 1.0;
  double H = 0.0;
  double k = 0.0;  // accumulated hardening parameter, advanced by the caller

  double yield_stress() const { return mode == YieldMode::perfect ? s_y : s_y + H * k; }
  void validate() const;
};

enum class ModulusMode { constant, ramberg_osgood_consistent };

struct FlowModel {
  ModulusMode modulus_mode = ModulusMode::constant;
  double K0 = 1.0;

  void validate() const;
};

struct OntologyConstants {
  double s_0 = 1.0;   // proportional limit
  double A = 1.0;     // power-law coefficient (ignored when continuity is on)
  double n = 1.0;     // power-law exponent
  double E_el = 1.0;  // elastic effective modulus
  double bulk = 1.0;
  double phason_coupling = 0.0;  // alpha in f(K) = alpha |K|
  bool continuity = true;        // enforce A = s_0^(1-n) / E_el

  double effective_A() const;
  /// E_el relates S_eff to the equivalent strain sqrt(2/3 e':e'), so the
  /// shear modulus is E_el / 3 and the linear law matches the elastic branch
  /// of effective_strain.
  double shear_modulus() const;
  double lame_lambda() const { return bulk - 2.0 * shear_modulus() / 3.0; }
  void validate() const;
};

/// Power-law creep rate B (s / s_hat)^(-m), or B (s / s_hat)^m when inverted.
/// Throws DomainError for s <= 0.
double creep_rate(double s, const CreepParams& p);

struct EffectiveStress {
  double phonon = 0.0;  // von Mises of the phonon deviator
  double phason = 0.0;  // alpha * Frobenius norm of K
  double total = 0.0;
};

EffectiveStress effective_stress(const StressState& st, const OntologyConstants& c);

/// Omega = S_eff - Y(k).
double yield_function(double s_eff, const YieldModel& y);

struct YieldGradients {
  PhononTensor phonon;
  PhasonTensor phason;
  bool phonon_degenerate = false;
  bool phason_degenerate = false;
};

/// dOmega/ds = 3/2 s'/S_e and dOmega/dK = alpha K/|K|. Degenerate points
/// (S_e = 0 or |K| = 0) give zero tensors with the matching flag set.
YieldGradients yield_gradients(const StressState& st, const OntologyConstants& c);

/// K(S_eff) of the flow rule. Throws DomainError when it is not positive.
double clustering_modulus(double s_eff, const FlowModel& f, const OntologyConstants& c);

struct FlowIncrement {
  PhononTensor phonon;
  PhasonTensor phason;
};

/// Incremental plastic strains dS_eff / K * dOmega/dsigma. Zero when
/// the state is inside the yield surface or the increment is not loading.
FlowIncrement plastic_flow_increment(const StressState& st, double dS_eff, const FlowModel& f,
                                     const YieldModel& y, const OntologyConstants& c);

/// Elastic branch S/E_el up to s_0, power branch A S^n above.
double effective_strain(double s_eff, const OntologyConstants& c);
/// Derivative of effective_strain with respect to S_eff.
double effective_strain_slope(double s_eff, const OntologyConstants& c);

/// Total strains of the deformation theory, with the linear bulk closure for
/// both traces.
StrainState total_deformation_state(const StressState& st, const OntologyConstants& c);

}  // namespace fsn::constitutive
