#include <cmath>
#include <limits>
#include <string>

#include "fsn/constitutive.hpp"
#include "fsn/error.hpp"

namespace fsn::constitutive {
namespace {

void require(bool ok, const char* message) {
  if (!ok) throw ValidationError(message);
}

double von_mises(const PhononTensor& deviator) {
  return std::sqrt(1.5 * deviator.contract(deviator));
}

}  // namespace

void CreepParams::validate() const {
  require(B > 0.0 && std::isfinite(B), "creep.B must be > 0");
  require(s_hat > 0.0 && std::isfinite(s_hat), "creep.s_hat must be > 0");
  require(std::isfinite(m), "creep.m must be finite");
}

void YieldModel::validate() const {
  require(s_y > 0.0 && std::isfinite(s_y), "yield.s_y must be > 0");
  require(H >= 0.0 && std::isfinite(H), "yield.H must be >= 0");
  require(k >= 0.0, "yield.k must be >= 0");
}

void FlowModel::validate() const { require(K0 > 0.0 && std::isfinite(K0), "flow.K0 must be > 0"); }

double OntologyConstants::effective_A() const {
  return continuity ? std::pow(s_0, 1.0 - n) / E_el : A;
}

double OntologyConstants::shear_modulus() const { return E_el / 3.0; }

void OntologyConstants::validate() const {
  require(s_0 > 0.0, "constitutive.s_0 must be > 0");
  require(A > 0.0, "constitutive.A must be > 0");
  require(n >= 1.0, "constitutive.n must be >= 1");
  require(E_el > 0.0, "constitutive.E_el must be > 0");
  require(bulk > 0.0, "constitutive.bulk must be > 0");
  require(phason_coupling >= 0.0, "constitutive.phason_coupling must be >= 0");
}

double creep_rate(double s, const CreepParams& p) {
  if (!(s > 0.0)) throw DomainError("creep_rate requires a positive stress");
  const double ratio = p.orientation == CreepOrientation::as_printed ? p.s_hat / s : s / p.s_hat;
  return p.B * std::pow(ratio, p.m);
}

EffectiveStress effective_stress(const StressState& st, const OntologyConstants& c) {
  EffectiveStress e;
  e.phonon = von_mises(st.phonon.deviator());
  e.phason = c.phason_coupling * st.phason.norm();
  e.total = e.phonon + e.phason;
  return e;
}

double yield_function(double s_eff, const YieldModel& y) { return s_eff - y.yield_stress(); }

YieldGradients yield_gradients(const StressState& st, const OntologyConstants& c) {
  YieldGradients g;
  const PhononTensor dev = st.phonon.deviator();
  const double s_e = von_mises(dev);
  const double scale = std::max(1.0, st.phonon.matrix().norm());
  if (s_e > 1e-14 * scale) {
    g.phonon = (dev * (1.5 / s_e)).deviator();
  } else {
    g.phonon_degenerate = true;
  }
  const double k_norm = st.phason.norm();
  if (k_norm > 0.0) {
    g.phason = st.phason * (c.phason_coupling / k_norm);
  } else {
    g.phason_degenerate = true;
  }
  return g;
}

double clustering_modulus(double s_eff, const FlowModel& f, const OntologyConstants& c) {
  double modulus = f.K0;
  if (f.modulus_mode == ModulusMode::ramberg_osgood_consistent) {
    const double compliance = c.effective_A() * c.n * std::pow(s_eff, c.n - 1.0);
    modulus = compliance > 0.0 ? 1.0 / compliance : std::numeric_limits<double>::infinity();
  }
  if (!(modulus > 0.0)) {
    throw DomainError("clustering modulus is not positive at S_eff = " + std::to_string(s_eff));
  }
  return modulus;
}

FlowIncrement plastic_flow_increment(const StressState& st, double dS_eff, const FlowModel& f,
                                     const YieldModel& y, const OntologyConstants& c) {
  FlowIncrement inc;
  const double s_eff = effective_stress(st, c).total;
  if (yield_function(s_eff, y) < 0.0 || !(dS_eff > 0.0)) return inc;
  const double modulus = clustering_modulus(s_eff, f, c);
  if (std::isinf(modulus)) return inc;
  const auto grad = yield_gradients(st, c);
  const double factor = dS_eff / modulus;
  inc.phonon = (grad.phonon * factor).deviator();
  inc.phason = grad.phason * factor;
  return inc;
}

double effective_strain(double s_eff, const OntologyConstants& c) {
  if (s_eff < 0.0) throw DomainError("effective_strain requires S_eff >= 0");
  if (s_eff <= c.s_0) return s_eff / c.E_el;
  return c.effective_A() * std::pow(s_eff, c.n);
}

double effective_strain_slope(double s_eff, const OntologyConstants& c) {
  if (s_eff <= c.s_0) return 1.0 / c.E_el;
  return c.effective_A() * c.n * std::pow(s_eff, c.n - 1.0);
}

StrainState total_deformation_state(const StressState& st, const OntologyConstants& c) {
  StrainState out;
  const double s_eff = effective_stress(st, c).total;
  const double vol_phonon = st.phonon.trace() / (3.0 * c.bulk);
  const double vol_phason = st.phason.trace() / (3.0 * c.bulk);
  Matrix3 eps = Matrix3::Identity() * (vol_phonon / 3.0);
  Matrix3 w = Matrix3::Identity() * (vol_phason / 3.0);
  if (s_eff > 0.0) {
    const double factor = 3.0 * effective_strain(s_eff, c) / (2.0 * s_eff);
    eps += factor * st.phonon.deviator().matrix();
    w += factor * st.phason.deviator().matrix();
  }
  out.phonon = PhononTensor(eps);
  out.phason = PhasonTensor(w);
  return out;
}

}  // namespace fsn::constitutive
