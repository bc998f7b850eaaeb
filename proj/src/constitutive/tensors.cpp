#include "fsn/constitutive.hpp"
#include "fsn/error.hpp"

namespace fsn::constitutive {

namespace {

Matrix3 traceless(const Matrix3& m) {
  Matrix3 d = m;
  const double t = ((m(0, 0) + m(1, 1)) + m(2, 2)) / 3.0;
  d(0, 0) -= t;
  d(1, 1) -= t;
  d(2, 2) = -(d(0, 0) + d(1, 1));
  return d;
}

}  // namespace

PhononTensor PhononTensor::diagonal(double a, double b, double c) {
  return PhononTensor(Eigen::Vector3d(a, b, c).asDiagonal().toDenseMatrix());
}

PhononTensor PhononTensor::deviator() const { return PhononTensor(traceless(m_)); }

PhononTensor& PhononTensor::operator+=(const PhononTensor& o) {
  const Matrix3 sum = m_ + o.m_;
  m_ = 0.5 * (sum + sum.transpose());
  return *this;
}

PhasonTensor::PhasonTensor(const Matrix3& m) : m_(m) {
  if (!m_.allFinite()) throw ValidationError("phason tensor has non-finite entries");
}

PhasonTensor PhasonTensor::deviator() const { return PhasonTensor(traceless(m_)); }

PhasonTensor& PhasonTensor::operator+=(const PhasonTensor& o) {
  m_ += o.m_;
  if (!m_.allFinite()) throw ValidationError("phason tensor has non-finite entries");
  return *this;
}

std::array<double, 9> row_major(const Matrix3& m) {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(3 * i + j)] = m(i, j);
  return out;
}

}  // namespace fsn::constitutive
