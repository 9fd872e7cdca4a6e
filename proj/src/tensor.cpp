#include "daif/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace daif {

namespace {

using EMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
  }
}

void require_2d(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected 2-D tensor, got " +
                     shape_str(a.shape));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape_product(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " implies " +
                     std::to_string(shape_product(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is " + shape_str(shape));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is " + shape_str(shape));
  return shape[1];
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item(): tensor has " + std::to_string(size()) +
                        " elements");
  }
  return data[0];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.node = -1;
  return t;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

double gelu_value(double x) {
  return x * 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
  const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

int Tape::push(std::vector<std::size_t> shape,
               std::function<void(Tape&, const std::vector<double>&)> pull) {
  if (after_backward_) {
    grads_.clear();
    after_backward_ = false;
  }
  nodes_.push_back(Node{std::move(shape), std::move(pull)});
  return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buf(int id, std::size_t size) {
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty()) g.assign(size, 0.0);
  return g;
}

void Tape::accumulate(int id, std::size_t size, const double* src) {
  if (id < 0) return;
  auto& g = grad_buf(id, size);
  for (std::size_t i = 0; i < size; ++i) g[i] += src[i];
}

Tensor Tape::finish(Tensor out) {
  if (check_finite && !out.all_finite()) {
    throw NumericError("tape: non-finite value in op output of shape " +
                       shape_str(out.shape));
  }
  return out;
}

Tensor Tape::leaf(const Tensor& value) {
  Tensor t = value;
  t.node = push(t.shape, nullptr);
  return t;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.detached();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  const int ia = a.node, ib = b.node;
  const std::size_t n = out.size();
  out.node = push(out.shape, [ia, ib, n](Tape& t, const std::vector<double>& g) {
    t.accumulate(ia, n, g.data());
    t.accumulate(ib, n, g.data());
  });
  return finish(std::move(out));
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.detached();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  const int ia = a.node, ib = b.node;
  const std::size_t n = out.size();
  out.node = push(out.shape, [ia, ib, n](Tape& t, const std::vector<double>& g) {
    t.accumulate(ia, n, g.data());
    if (ib >= 0) {
      auto& gb = t.grad_buf(ib, n);
      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
    }
  });
  return finish(std::move(out));
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.detached();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  const int ia = a.node, ib = b.node;
  std::vector<double> av = a.data, bv = b.data;
  const std::size_t n = out.size();
  out.node = push(out.shape, [ia, ib, n, av = std::move(av), bv = std::move(bv)](
                                 Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, n);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
    }
    if (ib >= 0) {
      auto& gb = t.grad_buf(ib, n);
      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
    }
  });
  return finish(std::move(out));
}

Tensor Tape::scale(const Tensor& a, double c) {
  Tensor out = a.detached();
  for (double& v : out.data) v *= c;
  const int ia = a.node;
  const std::size_t n = out.size();
  out.node = push(out.shape, [ia, c, n](Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, n);
      for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
    }
  });
  return finish(std::move(out));
}

Tensor Tape::add_rowvec(const Tensor& a, const Tensor& bias) {
  require_2d(a, "add_rowvec");
  if (bias.rank() != 1 || bias.size() != a.cols()) {
    throw ShapeError("add_rowvec: bias " + shape_str(bias.shape) +
                     " does not match " + shape_str(a.shape));
  }
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = a.detached();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += bias.data[j];
  const int ia = a.node, ibias = bias.node;
  out.node = push(out.shape, [ia, ibias, r, c](Tape& t,
                                               const std::vector<double>& g) {
    t.accumulate(ia, r * c, g.data());
    if (ibias >= 0) {
      auto& gb = t.grad_buf(ibias, c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) {
          const double v = g[i * c + j];
          if (v != 0.0) gb[j] += v;
        }
    }
  });
  return finish(std::move(out));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape) +
                     " x " + shape_str(b.shape));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  {
    ECMap A(a.data.data(), m, k), B(b.data.data(), k, n);
    EMap O(out.data.data(), m, n);
    O.noalias() = A * B;
  }
  const int ia = a.node, ib = b.node;
  std::vector<double> av = a.data, bv = b.data;
  out.node = push(
      out.shape, [ia, ib, m, k, n, av = std::move(av), bv = std::move(bv)](
                     Tape& t, const std::vector<double>& g) {
        ECMap G(g.data(), m, n);
        if (ia >= 0) {
          auto& ga = t.grad_buf(ia, m * k);
          ECMap B(bv.data(), k, n);
          EMap GA(ga.data(), m, k);
          GA.noalias() += G * B.transpose();
        }
        if (ib >= 0) {
          // Row-major accumulation over rows of A keeps the contribution
          // order independent of m; rows with an all-zero upstream gradient
          // are skipped outright, so appending such rows leaves the buffer
          // bit-identical.
          auto& gb = t.grad_buf(ib, k * n);
          for (std::size_t i = 0; i < m; ++i) {
            const double* arow = av.data() + i * k;
            const double* grow = g.data() + i * n;
            bool all_zero = true;
            for (std::size_t q = 0; q < n; ++q) {
              if (grow[q] != 0.0) {
                all_zero = false;
                break;
              }
            }
            if (all_zero) continue;
            for (std::size_t p = 0; p < k; ++p) {
              const double apv = arow[p];
              if (apv == 0.0) continue;
              double* dst = gb.data() + p * n;
              for (std::size_t q = 0; q < n; ++q) dst[q] += apv * grow[q];
            }
          }
        }
      });
  return finish(std::move(out));
}

Tensor Tape::transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = a.data[i * c + j];
  const int ia = a.node;
  out.node = push(out.shape, [ia, r, c](Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, r * c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    }
  });
  return finish(std::move(out));
}

Tensor Tape::gelu(const Tensor& a) {
  Tensor out = a.detached();
  for (double& v : out.data) v = gelu_value(v);
  const int ia = a.node;
  std::vector<double> av = a.data;
  const std::size_t n = out.size();
  out.node = push(out.shape, [ia, n, av = std::move(av)](
                                 Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, n);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * gelu_derivative(av[i]);
    }
  });
  return finish(std::move(out));
}

Tensor Tape::softmax_rows(const Tensor& a) {
  require_2d(a, "softmax_rows");
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = a.detached();
  for (std::size_t i = 0; i < r; ++i) {
    double* row = out.data.data() + i * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= sum;
  }
  const int ia = a.node;
  std::vector<double> pv = out.data;
  out.node = push(out.shape, [ia, r, c, pv = std::move(pv)](
                                 Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, r * c);
      for (std::size_t i = 0; i < r; ++i) {
        const double* p = pv.data() + i * c;
        const double* gr = g.data() + i * c;
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += p[j] * gr[j];
        double* dst = ga.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += p[j] * (gr[j] - dot);
      }
    }
  });
  return finish(std::move(out));
}

Tensor Tape::layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                        double eps) {
  require_2d(a, "layer_norm");
  const std::size_t r = a.rows(), c = a.cols();
  if (gain.rank() != 1 || gain.size() != c || bias.rank() != 1 ||
      bias.size() != c) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape) + "/" +
                     shape_str(bias.shape) + " do not match " +
                     shape_str(a.shape));
  }
  if (eps <= 0.0) throw ContractError("layer_norm: eps must be > 0");

  Tensor out = Tensor::zeros({r, c});
  std::vector<double> xhat(r * c);
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = a.data.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (row[j] - mean) * is;
      xhat[i * c + j] = xh;
      out.data[i * c + j] = gain.data[j] * xh + bias.data[j];
    }
  }
  const int ia = a.node, ig = gain.node, ib = bias.node;
  std::vector<double> gv = gain.data;
  out.node = push(
      out.shape,
      [ia, ig, ib, r, c, xhat = std::move(xhat), inv_std = std::move(inv_std),
       gv = std::move(gv)](Tape& t, const std::vector<double>& g) {
        if (ig >= 0) {
          auto& gg = t.grad_buf(ig, c);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
              const double v = g[i * c + j];
              if (v != 0.0) gg[j] += v * xhat[i * c + j];
            }
        }
        if (ib >= 0) {
          auto& gb = t.grad_buf(ib, c);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
              const double v = g[i * c + j];
              if (v != 0.0) gb[j] += v;
            }
        }
        if (ia >= 0) {
          auto& ga = t.grad_buf(ia, r * c);
          const double dc = static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            const double* gr = g.data() + i * c;
            const double* xh = xhat.data() + i * c;
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = gr[j] * gv[j];
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xh[j];
            }
            double* dst = ga.data() + i * c;
            for (std::size_t j = 0; j < c; ++j) {
              const double dxh = gr[j] * gv[j];
              dst[j] += inv_std[i] *
                        (dxh - sum_dxhat / dc - xh[j] * sum_dxhat_xhat / dc);
            }
          }
        }
      });
  return finish(std::move(out));
}

Tensor Tape::slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  require_2d(a, "slice_rows");
  if (r0 > r1 || r1 > a.rows()) {
    throw ContractError("slice_rows: range [" + std::to_string(r0) + "," +
                        std::to_string(r1) + ") out of " +
                        std::to_string(a.rows()) + " rows");
  }
  const std::size_t c = a.cols(), rows_total = a.rows();
  Tensor out = Tensor::zeros({r1 - r0, c});
  std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(r0 * c),
            a.data.begin() + static_cast<std::ptrdiff_t>(r1 * c),
            out.data.begin());
  const int ia = a.node;
  out.node = push(out.shape, [ia, r0, r1, c, rows_total](
                                 Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, rows_total * c);
      for (std::size_t i = 0; i < (r1 - r0) * c; ++i) ga[r0 * c + i] += g[i];
    }
  });
  return finish(std::move(out));
}

Tensor Tape::slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  require_2d(a, "slice_cols");
  if (c0 > c1 || c1 > a.cols()) {
    throw ContractError("slice_cols: range [" + std::to_string(c0) + "," +
                        std::to_string(c1) + ") out of " +
                        std::to_string(a.cols()) + " cols");
  }
  const std::size_t r = a.rows(), c = a.cols(), w = c1 - c0;
  Tensor out = Tensor::zeros({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.data[i * w + j] = a.data[i * c + c0 + j];
  const int ia = a.node;
  out.node =
      push(out.shape, [ia, r, c, c0, w](Tape& t, const std::vector<double>& g) {
        if (ia >= 0) {
          auto& ga = t.grad_buf(ia, r * c);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j)
              ga[i * c + c0 + j] += g[i * w + j];
        }
      });
  return finish(std::move(out));
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_rows");
    if (p.cols() != c) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape) +
                       " vs " + shape_str(parts[0].shape));
    }
    r += p.rows();
  }
  Tensor out = Tensor::zeros({r, c});
  std::vector<int> ids;
  std::vector<std::size_t> row_counts;
  std::size_t at = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + at);
    at += p.size();
    ids.push_back(p.node);
    row_counts.push_back(p.rows());
  }
  out.node = push(out.shape, [ids, row_counts, c](Tape& t,
                                                  const std::vector<double>& g) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t n = row_counts[p] * c;
      t.accumulate(ids[p], n, g.data() + off);
      off += n;
    }
  });
  return finish(std::move(out));
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape) +
                       " vs " + shape_str(parts[0].shape));
    }
    c += p.cols();
  }
  Tensor out = Tensor::zeros({r, c});
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  std::size_t c_off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out.data[i * c + c_off + j] = p.data[i * w + j];
    c_off += w;
    ids.push_back(p.node);
    widths.push_back(w);
  }
  out.node =
      push(out.shape, [ids, widths, r, c](Tape& t, const std::vector<double>& g) {
        std::size_t c_off = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          const std::size_t w = widths[p];
          if (ids[p] >= 0) {
            auto& gp = t.grad_buf(ids[p], r * w);
            for (std::size_t i = 0; i < r; ++i)
              for (std::size_t j = 0; j < w; ++j)
                gp[i * w + j] += g[i * c + c_off + j];
          }
          c_off += w;
        }
      });
  return finish(std::move(out));
}

Tensor Tape::sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  Tensor out = Tensor::scalar(s);
  const int ia = a.node;
  const std::size_t n = a.size();
  out.node = push(out.shape, [ia, n](Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, n);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
    }
  });
  return finish(std::move(out));
}

Tensor Tape::mean_all(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean_all: empty tensor");
  double s = 0.0;
  for (double v : a.data) s += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(s * inv);
  const int ia = a.node;
  const std::size_t n = a.size();
  out.node = push(out.shape, [ia, n, inv](Tape& t, const std::vector<double>& g) {
    if (ia >= 0) {
      auto& ga = t.grad_buf(ia, n);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[0] * inv;
    }
  });
  return finish(std::move(out));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(loss.shape));
  }
  if (loss.node < 0 || loss.node >= static_cast<int>(nodes_.size())) {
    throw ContractError("backward: loss is not attached to this tape");
  }
  grads_.assign(nodes_.size(), {});
  // Leaves always end with an allocated (possibly zero) gradient buffer.
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].pull) {
      std::size_t n = 1;
      for (std::size_t d : nodes_[id].shape) n *= d;
      grads_[id].assign(n, 0.0);
    }
  }
  grad_buf(loss.node, 1)[0] += 1.0;
  for (int id = loss.node; id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (node.pull && !grads_[static_cast<std::size_t>(id)].empty()) {
      node.pull(*this, grads_[static_cast<std::size_t>(id)]);
    }
  }
  nodes_.clear();
  after_backward_ = true;
}

std::span<const double> Tape::grad(const Tensor& t) const {
  if (t.node < 0 || t.node >= static_cast<int>(grads_.size())) {
    throw ContractError("grad: tensor is not a recorded node");
  }
  const auto& g = grads_[static_cast<std::size_t>(t.node)];
  if (g.empty()) {
    throw ContractError("grad: node " + std::to_string(t.node) +
                        " has no gradient buffer (was backward run?)");
  }
  return {g.data(), g.size()};
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  after_backward_ = false;
}

}  // namespace daif
