#include "pmmtalk/autodiff.hpp"

#include "pmmtalk/error.hpp"

#include <cmath>
#include <limits>

namespace pmmtalk {

Parameter& ParameterStore::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) {
    throw Error(ErrorKind::PreconditionFailed, "duplicate parameter name " + name);
  }
  it->second.value = std::move(init);
  it->second.zero_grad();
  return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorKind::PreconditionFailed, "unknown parameter " + name);
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorKind::PreconditionFailed, "unknown parameter " + name);
  return it->second;
}

std::size_t ParameterStore::census() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Graph::param(Parameter& p) {
  Node node{p.value, {}, {}, record_};
  if (record_) {
    Parameter* target = &p;
    node.backprop = [target](Graph&, const Matrix& up) { target->grad += up; };
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Graph::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Graph::push(Matrix value, std::initializer_list<Var> inputs, Backprop backprop) {
  return push(std::move(value), std::vector<Var>(inputs), std::move(backprop));
}

Var Graph::push(Matrix value, const std::vector<Var>& inputs, Backprop backprop) {
  bool needs = false;
  if (record_) {
    for (const Var& v : inputs) needs = needs || needs_grad(v.id());
  }
  Node node{std::move(value), {}, {}, needs};
  if (needs) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Graph::backward(Var out) {
  if (out.rows() != 1 || out.cols() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "backward() needs a scalar output");
  }
  grad_buffer(out.id()).setOnes();
  for (int i = out.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, n.grad);
  }
}

namespace {

void accumulate(Graph& g, Var v, const Matrix& delta) {
  if (g.needs_grad(v.id())) g.grad_buffer(v.id()) += delta;
}

template <typename Expr>
void accumulate_expr(Graph& g, Var v, const Expr& delta) {
  if (g.needs_grad(v.id())) g.grad_buffer(v.id()) += delta;
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": operand shapes differ");
  }
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Graph& g = *a.graph();
  return g.push(a.value() + b.value(), {a, b}, [a, b](Graph& g, const Matrix& up) {
    accumulate(g, a, up);
    accumulate(g, b, up);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Graph& g = *a.graph();
  return g.push(a.value() - b.value(), {a, b}, [a, b](Graph& g, const Matrix& up) {
    accumulate(g, a, up);
    accumulate_expr(g, b, -up);
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a, b, "hadamard");
  Graph& g = *a.graph();
  return g.push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, const Matrix& up) {
    accumulate_expr(g, a, up.cwiseProduct(b.value()));
    accumulate_expr(g, b, up.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  return g.push(a.value() * s, {a}, [a, s](Graph& g, const Matrix& up) { accumulate_expr(g, a, up * s); });
}

Var scale_by(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw Error(ErrorKind::ShapeMismatch, "scale_by: factor must be 1x1");
  Graph& g = *a.graph();
  return g.push(a.value() * s.scalar(), {a, s}, [a, s](Graph& g, const Matrix& up) {
    accumulate_expr(g, a, up * s.scalar());
    if (g.needs_grad(s.id())) g.grad_buffer(s.id())(0, 0) += up.cwiseProduct(a.value()).sum();
  });
}

Var add_scalar(Var a, double s) {
  Graph& g = *a.graph();
  return g.push(a.value().array() + s, {a}, [a](Graph& g, const Matrix& up) { accumulate(g, a, up); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error(ErrorKind::ShapeMismatch, "add_row: width mismatch");
  Graph& g = *a.graph();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return g.push(std::move(out), {a, row}, [a, row](Graph& g, const Matrix& up) {
    accumulate(g, a, up);
    accumulate_expr(g, row, up.colwise().sum());
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "matmul: inner dimensions differ");
  Graph& g = *a.graph();
  return g.push(a.value() * b.value(), {a, b}, [a, b](Graph& g, const Matrix& up) {
    if (g.needs_grad(a.id())) g.grad_buffer(a.id()).noalias() += up * b.value().transpose();
    if (g.needs_grad(b.id())) g.grad_buffer(b.id()).noalias() += a.value().transpose() * up;
  });
}

Var matmul_rowwise(Var a, Var b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::ShapeMismatch, "matmul: inner dimensions differ");
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  Matrix out(x.rows(), w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < x.cols(); ++k) s += x(i, k) * w(k, j);
      out(i, j) = s;
    }
  }
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& up) {
    if (g.needs_grad(a.id())) g.grad_buffer(a.id()).noalias() += up * b.value().transpose();
    if (g.needs_grad(b.id())) g.grad_buffer(b.id()).noalias() += a.value().transpose() * up;
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::ShapeMismatch, "matmul_nt: widths differ");
  Graph& g = *a.graph();
  return g.push(a.value() * b.value().transpose(), {a, b}, [a, b](Graph& g, const Matrix& up) {
    if (g.needs_grad(a.id())) g.grad_buffer(a.id()).noalias() += up * b.value();
    if (g.needs_grad(b.id())) g.grad_buffer(b.id()).noalias() += up.transpose() * a.value();
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  return g.push(a.value().transpose(), {a}, [a](Graph& g, const Matrix& up) { accumulate_expr(g, a, up.transpose()); });
}

Var square(Var a) {
  Graph& g = *a.graph();
  return g.push(a.value().array().square(), {a}, [a](Graph& g, const Matrix& up) {
    accumulate_expr(g, a, 2.0 * up.cwiseProduct(a.value()));
  });
}

Var exp(Var a) {
  Graph& g = *a.graph();
  const Var out(&g, static_cast<int>(g.size()));
  return g.push(a.value().array().exp(), {a}, [a, out](Graph& g, const Matrix& up) {
    accumulate_expr(g, a, up.cwiseProduct(out.value()));
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  return g.push(std::move(out), {a}, [a](Graph& g, const Matrix& up) {
    Matrix d = a.value().unaryExpr([](double v) {
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    });
    accumulate_expr(g, a, up.cwiseProduct(d));
  });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  return g.push(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Graph& g, const Matrix& up) {
    accumulate_expr(g, a, Matrix::Constant(a.rows(), a.cols(), up(0, 0)));
  });
}

Var mean_rows(Var a) {
  Graph& g = *a.graph();
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return g.push(std::move(out), {a}, [a, n](Graph& g, const Matrix& up) {
    if (g.needs_grad(a.id())) g.grad_buffer(a.id()).rowwise() += up.row(0) / n;
  });
}

Var broadcast_rows(Var row, Eigen::Index rows) {
  if (row.rows() != 1) throw Error(ErrorKind::ShapeMismatch, "broadcast_rows: expected a single row");
  Graph& g = *row.graph();
  Matrix out = row.value().replicate(rows, 1);
  return g.push(std::move(out), {row}, [row](Graph& g, const Matrix& up) {
    accumulate_expr(g, row, up.colwise().sum());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_cols: no inputs");
  Graph& g = *parts.front().graph();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw Error(ErrorKind::LengthMismatch, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return g.push(std::move(out), parts, [parts](Graph& g, const Matrix& up) {
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      accumulate_expr(g, p, up.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "slice_cols: range out of bounds");
  }
  Graph& g = *a.graph();
  return g.push(a.value().middleCols(start, count), {a}, [a, start, count](Graph& g, const Matrix& up) {
    if (g.needs_grad(a.id())) g.grad_buffer(a.id()).middleCols(start, count) += up;
  });
}

Var diff_rows(Var a) {
  if (a.rows() < 2) throw Error(ErrorKind::TooShort, "diff_rows needs at least two rows");
  Graph& g = *a.graph();
  const Eigen::Index n = a.rows() - 1;
  Matrix out = a.value().bottomRows(n) - a.value().topRows(n);
  return g.push(std::move(out), {a}, [a, n](Graph& g, const Matrix& up) {
    if (!g.needs_grad(a.id())) return;
    Matrix& ga = g.grad_buffer(a.id());
    ga.bottomRows(n) += up;
    ga.topRows(n) -= up;
  });
}

namespace {

Matrix row_softmax(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a) {
  Graph& g = *a.graph();
  const Var out(&g, static_cast<int>(g.size()));
  return g.push(row_softmax(a.value()), {a}, [a, out](Graph& g, const Matrix& up) {
    const Matrix& p = out.value();
    Eigen::VectorXd dot = up.cwiseProduct(p).rowwise().sum();
    Matrix d = p.cwiseProduct(up - dot.replicate(1, up.cols()));
    accumulate(g, a, d);
  });
}

Var log_softmax_rows(Var a) {
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return g.push(std::move(out), {a}, [a](Graph& g, const Matrix& up) {
    Matrix p = row_softmax(a.value());
    Eigen::VectorXd total = up.rowwise().sum();
    accumulate_expr(g, a, up - p.cwiseProduct(total.replicate(1, up.cols())));
  });
}

Var layer_norm_rows(Var a, Var gain, Var bias, double eps) {
  if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 || bias.cols() != a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "layer_norm_rows: gain/bias width mismatch");
  }
  Graph& g = *a.graph();
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Matrix normed(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix out = (normed.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return g.push(std::move(out), {a, gain, bias},
                [a, gain, bias, normed = std::move(normed), inv_std](Graph& g, const Matrix& up) {
                  accumulate_expr(g, gain, up.cwiseProduct(normed).colwise().sum());
                  accumulate_expr(g, bias, up.colwise().sum());
                  if (!g.needs_grad(a.id())) return;
                  Matrix dn = up.array().rowwise() * gain.value().row(0).array();
                  Matrix& ga = g.grad_buffer(a.id());
                  for (Eigen::Index r = 0; r < dn.rows(); ++r) {
                    const double m1 = dn.row(r).mean();
                    const double m2 = dn.row(r).cwiseProduct(normed.row(r)).mean();
                    ga.row(r).array() += inv_std(r) * (dn.row(r).array() - m1 - normed.row(r).array() * m2);
                  }
                });
}

Var cosine_similarity(Var a, Var b) {
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "cosine_similarity: expected two rows of equal width");
  }
  Graph& g = *a.graph();
  const auto ra = a.value().row(0), rb = b.value().row(0);
  const double aa = ra.dot(ra), bb = rb.dot(rb);
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  // sqrt(aa * bb) rather than na * nb: identical rows then give exactly 1.
  const double c = ra.dot(rb) / std::sqrt(aa * bb);
  return g.push(Matrix::Constant(1, 1, c), {a, b}, [a, b, na, nb, c](Graph& g, const Matrix& up) {
    const double u = up(0, 0);
    accumulate_expr(g, a, u * (b.value() / (na * nb) - c * a.value() / (na * na)));
    accumulate_expr(g, b, u * (a.value() / (na * nb) - c * b.value() / (nb * nb)));
  });
}

Var im2col(Var a, Eigen::Index frames, Eigen::Index height, Eigen::Index width, Eigen::Index channels,
           Eigen::Index kernel, Eigen::Index stride, Eigen::Index pad) {
  if (a.rows() != frames * height * width || a.cols() != channels) {
    throw Error(ErrorKind::DimensionMismatch, "im2col: input does not match the declared map shape");
  }
  const Eigen::Index out_h = (height + 2 * pad - kernel) / stride + 1;
  const Eigen::Index out_w = (width + 2 * pad - kernel) / stride + 1;
  const Eigen::Index out_rows = frames * out_h * out_w;
  const Eigen::Index out_cols = kernel * kernel * channels;

  // Source row for every (output row, kernel tap), -1 for padding.
  std::vector<Eigen::Index> source(static_cast<std::size_t>(out_rows * kernel * kernel), -1);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index oy = 0; oy < out_h; ++oy) {
      for (Eigen::Index ox = 0; ox < out_w; ++ox) {
        const Eigen::Index row = (f * out_h + oy) * out_w + ox;
        for (Eigen::Index ky = 0; ky < kernel; ++ky) {
          for (Eigen::Index kx = 0; kx < kernel; ++kx) {
            const Eigen::Index y = oy * stride + ky - pad;
            const Eigen::Index x = ox * stride + kx - pad;
            if (y < 0 || y >= height || x < 0 || x >= width) continue;
            source[static_cast<std::size_t>(row * kernel * kernel + ky * kernel + kx)] = (f * height + y) * width + x;
          }
        }
      }
    }
  }

  const Matrix& in = a.value();
  Matrix out = Matrix::Zero(out_rows, out_cols);
  const Eigen::Index taps = kernel * kernel;
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    for (Eigen::Index t = 0; t < taps; ++t) {
      const Eigen::Index src = source[static_cast<std::size_t>(r * taps + t)];
      if (src >= 0) out.block(r, t * channels, 1, channels) = in.row(src);
    }
  }
  Graph& g = *a.graph();
  return g.push(std::move(out), {a}, [a, source = std::move(source), taps, channels](Graph& g, const Matrix& up) {
    if (!g.needs_grad(a.id())) return;
    Matrix& ga = g.grad_buffer(a.id());
    for (Eigen::Index r = 0; r < up.rows(); ++r) {
      for (Eigen::Index t = 0; t < taps; ++t) {
        const Eigen::Index src = source[static_cast<std::size_t>(r * taps + t)];
        if (src >= 0) ga.row(src) += up.block(r, t * channels, 1, channels);
      }
    }
  });
}

Var fold_frames(Var a, Eigen::Index frames) {
  if (frames <= 0 || a.rows() % frames != 0) {
    throw Error(ErrorKind::DimensionMismatch, "fold_frames: rows not divisible by frame count");
  }
  const Eigen::Index positions = a.rows() / frames;
  const Eigen::Index channels = a.cols();
  const Matrix& in = a.value();
  Matrix out(frames, positions * channels);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index p = 0; p < positions; ++p) {
      out.block(f, p * channels, 1, channels) = in.row(f * positions + p);
    }
  }
  Graph& g = *a.graph();
  return g.push(std::move(out), {a}, [a, positions, channels](Graph& g, const Matrix& up) {
    if (!g.needs_grad(a.id())) return;
    Matrix& ga = g.grad_buffer(a.id());
    for (Eigen::Index f = 0; f < up.rows(); ++f) {
      for (Eigen::Index p = 0; p < positions; ++p) {
        ga.row(f * positions + p) += up.block(f, p * channels, 1, channels);
      }
    }
  });
}

}  // namespace pmmtalk
