#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coachmarl/rng.hpp"

namespace coachmarl {

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
};

/// Ordered list of named matrices. The order is the manifest order used by
/// checkpoints and by flatten()/assign_flat().
class ParameterSet {
 public:
  /// Returns the index of the new tensor; references into the set are not stable across add().
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const noexcept { return tensors_.size(); }
  bool empty() const noexcept { return tensors_.empty(); }
  std::size_t scalar_count() const noexcept;

  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Eigen::MatrixXd& value(std::size_t i) { return tensors_[i].value; }
  const Eigen::MatrixXd& value(std::size_t i) const { return tensors_[i].value; }

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  ParameterSet zeros_like() const;
  void set_zero();
  /// PyTorch Linear default: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias alike.
  void init_uniform_fan_in(std::size_t weight, std::size_t bias, Rng& rng);

  bool same_shapes(const ParameterSet& other) const;
  bool all_finite() const;
  double squared_norm() const;
  void scale(double factor);

  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<Tensor> tensors_;
};

}  // namespace coachmarl
