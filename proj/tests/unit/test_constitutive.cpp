#include <doctest.h>

#include <cmath>
#include <random>

#include "fsn/constitutive.hpp"
#include "fsn/error.hpp"

using namespace fsn::constitutive;

namespace {

Matrix3 random_matrix(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = u(rng);
  return m;
}

double von_mises(const Matrix3& s) {
  const Matrix3 dev = s - Matrix3::Identity() * s.trace() / 3.0;
  return std::sqrt(1.5 * dev.cwiseProduct(dev).sum());
}

}  // namespace

TEST_CASE("creep law") {
  CreepParams p{2.5, 3.0, 1.7, CreepOrientation::as_printed};
  CHECK(creep_rate(1.7, p) == 2.5);
  p.orientation = CreepOrientation::inverted;
  CHECK(creep_rate(1.7, p) == 2.5);
  p.m = 0.0;
  CHECK(creep_rate(0.3, p) == 2.5);
  CHECK(creep_rate(1e3, p) == 2.5);
  const CreepParams q{1.0, 2.0, 2.0, CreepOrientation::as_printed};
  CHECK(creep_rate(1.0, q) == doctest::Approx(4.0).epsilon(1e-15));
  const CreepParams r{1.0, 2.0, 2.0, CreepOrientation::inverted};
  CHECK(creep_rate(1.0, r) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(creep_rate(0.0, q), fsn::DomainError);
  CHECK_THROWS_AS(creep_rate(-1.0, q), fsn::DomainError);
  CHECK_THROWS_AS((CreepParams{-1.0, 1.0, 1.0}.validate()), fsn::ValidationError);
}

TEST_CASE("effective stress") {
  const OntologyConstants c{.phason_coupling = 0.5};
  StressState st;
  st.phonon = PhononTensor::diagonal(3.0, 0.0, 0.0);
  CHECK(effective_stress(st, c).phonon == doctest::Approx(3.0));
  CHECK(effective_stress(st, c).total == doctest::Approx(3.0));
  st.phonon = PhononTensor::diagonal(2.0, 2.0, 2.0);
  CHECK(effective_stress(st, c).total == doctest::Approx(0.0));
  Matrix3 k = Matrix3::Zero();
  k(0, 1) = 4.0;
  st.phason = PhasonTensor(k);
  CHECK(effective_stress(st, c).phason == doctest::Approx(2.0));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const PhononTensor s(random_matrix(rng, 2.0));
    CHECK(effective_stress({s, {}}, c).phonon == doctest::Approx(von_mises(s.matrix())));
  }
}

TEST_CASE("yield function") {
  YieldModel perfect{YieldMode::perfect, 1.5};
  CHECK(yield_function(1.5, perfect) == 0.0);
  CHECK(yield_function(0.0, perfect) < 0.0);
  YieldModel hard{YieldMode::linear_hardening, 1.0, 2.0, 0.5};
  CHECK(yield_function(2.5, hard) == doctest::Approx(0.5));
}

TEST_CASE("yield gradients: fixed cases") {
  const OntologyConstants c{.phason_coupling = 1.0};
  StressState st;
  st.phonon = PhononTensor::diagonal(2.0, 0.0, 0.0);
  auto g = yield_gradients(st, c);
  CHECK(g.phonon(0, 0) == doctest::Approx(1.0));
  CHECK(g.phonon(1, 1) == doctest::Approx(-0.5));
  CHECK(g.phonon(2, 2) == doctest::Approx(-0.5));
  CHECK(g.phason_degenerate);
  CHECK(g.phason.norm() == 0.0);

  StressState zero;
  g = yield_gradients(zero, c);
  CHECK(g.phonon_degenerate);
  CHECK(g.phonon.matrix().isZero());

  Matrix3 k = Matrix3::Zero();
  k(0, 1) = 0.7;
  st.phason = PhasonTensor(k);
  g = yield_gradients(st, c);
  CHECK(g.phason(0, 1) == doctest::Approx(1.0));
  CHECK(g.phason.norm() == doctest::Approx(1.0));
}

TEST_CASE("yield gradients match central differences") {
  std::mt19937_64 rng(11);
  const OntologyConstants c{.phason_coupling = 0.8};
  for (int trial = 0; trial < 100; ++trial) {
    StressState st{PhononTensor(random_matrix(rng, 3.0)), PhasonTensor(random_matrix(rng, 3.0))};
    const auto g = yield_gradients(st, c);
    const double scale = std::max(st.phonon.matrix().norm(), st.phason.norm());
    const double h = 1e-6 * scale;
    Matrix3 fd_s, fd_k;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        Matrix3 e = Matrix3::Zero();
        e(i, j) = h;
        auto f = [&](const StressState& x) { return effective_stress(x, c).total; };
        fd_s(i, j) = (f({PhononTensor(st.phonon.matrix() + e), st.phason}) -
                      f({PhononTensor(st.phonon.matrix() - e), st.phason})) / (2 * h);
        fd_k(i, j) = (f({st.phonon, PhasonTensor(st.phason.matrix() + e)}) -
                      f({st.phonon, PhasonTensor(st.phason.matrix() - e)})) / (2 * h);
      }
    }
    CHECK((g.phonon.matrix() - fd_s).norm() / g.phonon.matrix().norm() < 1e-6);
    CHECK((g.phason.matrix() - fd_k).norm() / g.phason.matrix().norm() < 1e-6);
  }
}

TEST_CASE("deviators are traceless") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const double scale = std::pow(10.0, static_cast<double>(i % 7) - 3.0);
    CHECK(std::abs(PhononTensor(random_matrix(rng, scale)).deviator().trace()) <= 1e-12);
    CHECK(std::abs(PhasonTensor(random_matrix(rng, scale)).deviator().trace()) <= 1e-12);
  }
}

TEST_CASE("phonon tensors stay symmetric") {
  std::mt19937_64 rng(8);
  PhononTensor acc;
  for (int i = 0; i < 50; ++i) {
    acc += PhononTensor(random_matrix(rng, 1.0)) * 0.37;
    CHECK(acc.matrix() == acc.matrix().transpose());
  }
  Matrix3 bad = Matrix3::Zero();
  bad(1, 2) = std::nan("");
  CHECK_THROWS_AS(PhasonTensor{bad}, fsn::ValidationError);
}

TEST_CASE("flow increment") {
  const OntologyConstants c;
  const YieldModel y{YieldMode::perfect, 1.0};
  const FlowModel f{ModulusMode::constant, 10.0};
  StressState st;
  st.phonon = PhononTensor::diagonal(0.5, 0.0, 0.0);
  CHECK(plastic_flow_increment(st, 1.0, f, y, c).phonon.matrix().isZero());
  st.phonon = PhononTensor::diagonal(2.0, 0.0, 0.0);
  CHECK(plastic_flow_increment(st, 0.0, f, y, c).phonon.matrix().isZero());
  const auto inc = plastic_flow_increment(st, 1.0, f, y, c);
  CHECK(inc.phonon(0, 0) == doctest::Approx(0.1));
  CHECK(inc.phonon(1, 1) == doctest::Approx(-0.05));
  CHECK(inc.phonon(2, 2) == doctest::Approx(-0.05));
  CHECK(std::abs(inc.phonon.trace()) <= 1e-12);
  CHECK_THROWS_AS(clustering_modulus(1.0, {ModulusMode::constant, 0.0}, c), fsn::DomainError);
}

TEST_CASE("effective strain") {
  OntologyConstants c{.s_0 = 1.0, .A = 0.01, .n = 3.0, .E_el = 100.0, .continuity = false};
  CHECK(effective_strain(0.0, c) == 0.0);
  CHECK(effective_strain(2.0, c) == doctest::Approx(0.08));
  c.continuity = true;
  CHECK(effective_strain(c.s_0, c) == doctest::Approx(c.s_0 / c.E_el));
  CHECK(c.effective_A() * std::pow(c.s_0, c.n) == doctest::Approx(c.s_0 / c.E_el));
  CHECK_THROWS_AS(effective_strain(-1.0, c), fsn::DomainError);
}

TEST_CASE("total deformation state") {
  const OntologyConstants c{.s_0 = 1.0, .A = 0.01, .n = 3.0, .E_el = 100.0, .bulk = 4.0,
                            .continuity = false};
  StressState st;
  CHECK(total_deformation_state(st, c).phonon.matrix().isZero());
  st.phonon = PhononTensor::diagonal(1.2, 1.2, 1.2);
  auto e = total_deformation_state(st, c);
  CHECK(e.phonon.deviator().matrix().norm() < 1e-15);
  CHECK(e.phonon.trace() == doctest::Approx(3.6 / 12.0));
  st.phonon = PhononTensor::diagonal(2.0, 0.0, 0.0);
  e = total_deformation_state(st, c);
  const Matrix3 expected = (3.0 * 0.08 / 4.0) * st.phonon.deviator().matrix();
  CHECK((e.phonon.deviator().matrix() - expected).norm() < 1e-14);
}
