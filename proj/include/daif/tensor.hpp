#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "daif/errors.hpp"

namespace daif {

/// Dense row-major tensor of 64-bit floats. A tensor returned by a Tape op
/// carries the id of the node that produced it; detached tensors (node < 0)
/// are plain immutable values and act as constants inside Tape expressions.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  int node = -1;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

  bool all_finite() const;
  double item() const;  // value of a scalar tensor

  Tensor detached() const;
};

std::string shape_str(const std::vector<std::size_t>& shape);

/// Records forward operations and runs reverse-mode accumulation.
///
/// Usage per step: register parameter leaves, compose ops to a scalar loss,
/// call backward(loss), read per-leaf gradients with grad(). backward clears
/// the recorded operations; gradients stay readable until the next leaf/op.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When set, every op output is checked for NaN/Inf.
  bool check_finite = false;

  /// Registers a differentiable leaf (a parameter).
  Tensor leaf(const Tensor& value);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
  Tensor scale(const Tensor& a, double c);
  /// rows(a) x cols(a) plus a length-cols(a) bias broadcast over rows.
  Tensor add_rowvec(const Tensor& a, const Tensor& bias);

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor transpose(const Tensor& a);

  Tensor gelu(const Tensor& a);
  Tensor softmax_rows(const Tensor& a);
  Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                    double eps = 1e-5);

  Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
  Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);

  Tensor sum_all(const Tensor& a);
  Tensor mean_all(const Tensor& a);

  /// Reverse accumulation from a scalar loss. Clears the op list; leaf
  /// gradients remain readable via grad() until the tape records again.
  void backward(const Tensor& loss);

  /// Gradient buffer of a leaf (valid after backward).
  std::span<const double> grad(const Tensor& t) const;

  void reset();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<std::size_t> shape;
    // Pulls the node's gradient into its inputs. Empty for leaves.
    std::function<void(Tape&, const std::vector<double>&)> pull;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool after_backward_ = false;

  int push(std::vector<std::size_t> shape,
           std::function<void(Tape&, const std::vector<double>&)> pull);
  std::vector<double>& grad_buf(int id, std::size_t size);
  void accumulate(int id, std::size_t size, const double* src);
  Tensor finish(Tensor out);
};

/// Exact GELU x * Phi(x) with the Gaussian CDF, and its derivative.
double gelu_value(double x);
double gelu_derivative(double x);

}  // namespace daif
