#include "coachmarl/learner/parameters.hpp"

#include <cmath>

#include "coachmarl/errors.hpp"

namespace coachmarl {

std::size_t ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  tensors_.push_back({std::move(name), Eigen::MatrixXd::Zero(rows, cols)});
  return tensors_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t total = 0;
  for (const auto& t : tensors_) total += static_cast<std::size_t>(t.value.size());
  return total;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out = *this;
  out.set_zero();
  return out;
}

void ParameterSet::set_zero() {
  for (auto& t : tensors_) t.value.setZero();
}

void ParameterSet::init_uniform_fan_in(std::size_t weight, std::size_t bias, Rng& rng) {
  const double fan_in = static_cast<double>(tensors_[weight].value.rows());
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (std::size_t idx : {weight, bias}) {
    auto& m = tensors_[idx].value;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
  }
}

bool ParameterSet::same_shapes(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (tensors_[i].value.rows() != other.tensors_[i].value.rows() ||
        tensors_[i].value.cols() != other.tensors_[i].value.cols()) {
      return false;
    }
  }
  return true;
}

bool ParameterSet::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

double ParameterSet::squared_norm() const {
  double total = 0.0;
  for (const auto& t : tensors_) total += t.value.squaredNorm();
  return total;
}

void ParameterSet::scale(double factor) {
  for (auto& t : tensors_) t.value *= factor;
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const auto& t : tensors_) {
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) out.push_back(t.value(r, c));
  }
  return out;
}

void ParameterSet::assign_flat(std::span<const double> values) {
  if (values.size() != scalar_count()) {
    throw ParameterError("flat parameter vector has " + std::to_string(values.size()) +
                         " entries, expected " + std::to_string(scalar_count()));
  }
  std::size_t k = 0;
  for (auto& t : tensors_) {
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = values[k++];
  }
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_shapes(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name) return false;
    // Exact equality; round-trip checks rely on it.
    if (!(a[i].value.array() == b[i].value.array()).all()) return false;
  }
  return true;
}

}  // namespace coachmarl
