#include "rtrack/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>

#include "rtrack/kernels.hpp"

namespace rtrack {

const Tensor& Value::tensor() const { return tape_->tensor(id_); }
bool Value::requires_grad() const { return tape_->requires_grad(id_); }

const Tensor& GradientStore::at(const Value& v) const {
  if (!contains(v)) throw std::out_of_range("GradientStore: no gradient for node " + std::to_string(v.id()));
  return *grads_[v.id()];
}

Tensor GradientStore::get_or_zero(const Value& v) const {
  return contains(v) ? *grads_[v.id()] : Tensor(v.shape());
}

std::size_t GradientStore::size() const {
  return static_cast<std::size_t>(std::count_if(grads_.begin(), grads_.end(), [](const auto& g) { return g.has_value(); }));
}

Value Tape::leaf(Tensor t, bool requires_grad) {
  nodes_.push_back(Node{std::move(t), requires_grad, {}, {}});
  return Value(this, nodes_.size() - 1);
}

Value Tape::record(const char* op, Tensor out, std::vector<Value> parents, BackwardFn backward) {
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (!std::isfinite(out[i])) {
      throw std::runtime_error(std::string(op) + ": non-finite output at index " + std::to_string(i));
    }
  }
  Node node;
  node.value = std::move(out);
  for (const Value& p : parents) {
    if (&p.tape() != this) throw std::invalid_argument(std::string(op) + ": operands from different tapes");
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
    node.parents.push_back(p.id());
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Value(this, nodes_.size() - 1);
}

GradientStore Tape::backward(const Value& loss) const {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  if (loss.tensor().numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  GradientStore store;
  const std::size_t top = loss.id();
  if (!nodes_[top].requires_grad) return store;

  std::vector<char> reachable(top + 1, 0);
  reachable[top] = 1;
  for (std::size_t id = top + 1; id-- > 0;) {
    if (!reachable[id] || !nodes_[id].requires_grad) continue;
    for (std::size_t p : nodes_[id].parents) reachable[p] = 1;
  }
  store.grads_.resize(top + 1);
  for (std::size_t id = 0; id <= top; ++id) {
    if (reachable[id] && nodes_[id].requires_grad) store.grads_[id] = Tensor(nodes_[id].value.shape());
  }
  store.grads_[top]->fill(1.0);

  std::vector<Tensor*> slots;
  for (std::size_t id = top + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!store.grads_[id] || !node.backward) continue;
    slots.clear();
    for (std::size_t p : node.parents) slots.push_back(store.grads_[p] ? &*store.grads_[p] : nullptr);
    node.backward(*store.grads_[id], slots);
  }
  return store;
}

namespace {

// Maps every output element to the flat index of each broadcast operand.
struct Broadcast {
  Shape out;
  std::vector<std::uint32_t> ia, ib;  // empty: operand has the output shape
  bool sa = false, sb = false;        // operand is a single element

  std::size_t a(std::size_t i) const { return sa ? 0 : (ia.empty() ? i : ia[i]); }
  std::size_t b(std::size_t i) const { return sb ? 0 : (ib.empty() ? i : ib[i]); }
};

std::vector<std::uint32_t> index_map(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t d = in.size(); d-- > 0;) {
    stride[d + offset] = in[d] == 1 ? 0 : s;
    s *= in[d];
  }
  const std::size_t n = shape_numel(out);
  std::vector<std::uint32_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t flat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    map[i] = static_cast<std::uint32_t>(flat);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      flat += stride[d];
      if (idx[d] < out[d]) break;
      flat -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return map;
}

Broadcast broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  const std::size_t rank = std::max(a.size(), b.size());
  bc.out.assign(rank, 1);
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t da = d + a.size() >= rank ? a[d + a.size() - rank] : 1;
    const std::size_t db = d + b.size() >= rank ? b[d + b.size() - rank] : 1;
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("binary: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
    }
    bc.out[d] = da == 1 ? db : da;
  }
  bc.sa = shape_numel(a) == 1 && shape_numel(bc.out) != 1;
  bc.sb = shape_numel(b) == 1 && shape_numel(bc.out) != 1;
  if (!bc.sa && a != bc.out) bc.ia = index_map(a, bc.out);
  if (!bc.sb && b != bc.out) bc.ib = index_map(b, bc.out);
  return bc;
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Sigmoid: return "sigmoid";
    case UnaryOp::Relu: return "relu";
    case UnaryOp::Square: return "square";
  }
  return "unary";
}

const char* binary_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    case BinaryOp::Div: return "div";
    case BinaryOp::Min: return "min";
    case BinaryOp::Max: return "max";
  }
  return "binary";
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double clamp_denominator(double d) {
  if (std::abs(d) >= kStabilityEps) return d;
  return d >= 0 ? kStabilityEps : -kStabilityEps;
}

// Outer/length/inner decomposition of a tensor around one axis.
struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit a{1, s[axis], 1};
  for (std::size_t d = 0; d < axis; ++d) a.outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) a.inner *= s[d];
  return a;
}

}  // namespace

Value unary(UnaryOp op, const Value& x) {
  const Tensor& in = x.tensor();
  Tensor out(in.shape());
  const std::size_t n = in.numel();
  switch (op) {
    case UnaryOp::Neg: for (std::size_t i = 0; i < n; ++i) out[i] = -in[i]; break;
    case UnaryOp::Exp: for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]); break;
    case UnaryOp::Log: for (std::size_t i = 0; i < n; ++i) out[i] = std::log(std::max(in[i], kStabilityEps)); break;
    case UnaryOp::Sqrt: for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(std::max(in[i], kStabilityEps)); break;
    case UnaryOp::Sigmoid: for (std::size_t i = 0; i < n; ++i) out[i] = stable_sigmoid(in[i]); break;
    case UnaryOp::Relu: for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0 ? in[i] : 0.0; break;
    case UnaryOp::Square: for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * in[i]; break;
  }
  Tape& tape = x.tape();
  const std::size_t out_id = tape.size();
  return tape.record(unary_name(op), std::move(out), {x},
                     [op, x, &tape, out_id](const Tensor& g, std::span<Tensor* const> pg) {
                       Tensor* gx = pg[0];
                       if (!gx) return;
                       const Tensor& in = x.tensor();
                       const Tensor& y = tape.tensor(out_id);
                       for (std::size_t i = 0; i < g.numel(); ++i) {
                         double d = 0.0;
                         switch (op) {
                           case UnaryOp::Neg: d = -1.0; break;
                           case UnaryOp::Exp: d = y[i]; break;
                           case UnaryOp::Log: d = in[i] >= kStabilityEps ? 1.0 / in[i] : 0.0; break;
                           case UnaryOp::Sqrt: d = in[i] >= kStabilityEps ? 0.5 / y[i] : 0.0; break;
                           case UnaryOp::Sigmoid: d = y[i] * (1.0 - y[i]); break;
                           case UnaryOp::Relu: d = in[i] > 0 ? 1.0 : 0.0; break;
                           case UnaryOp::Square: d = 2.0 * in[i]; break;
                         }
                         (*gx)[i] += g[i] * d;
                       }
                     });
}

Value binary(BinaryOp op, const Value& a, const Value& b) {
  auto bc = std::make_shared<Broadcast>(broadcast(a.shape(), b.shape()));
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  Tensor out(bc->out);
  const std::size_t n = out.numel();
  switch (op) {
    case BinaryOp::Add: for (std::size_t i = 0; i < n; ++i) out[i] = ta[bc->a(i)] + tb[bc->b(i)]; break;
    case BinaryOp::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = ta[bc->a(i)] - tb[bc->b(i)]; break;
    case BinaryOp::Mul: for (std::size_t i = 0; i < n; ++i) out[i] = ta[bc->a(i)] * tb[bc->b(i)]; break;
    case BinaryOp::Div:
      for (std::size_t i = 0; i < n; ++i) out[i] = ta[bc->a(i)] / clamp_denominator(tb[bc->b(i)]);
      break;
    case BinaryOp::Min:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::min(ta[bc->a(i)], tb[bc->b(i)]);
      break;
    case BinaryOp::Max:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::max(ta[bc->a(i)], tb[bc->b(i)]);
      break;
  }
  return a.tape().record(binary_name(op), std::move(out), {a, b},
                         [op, a, b, bc](const Tensor& g, std::span<Tensor* const> pg) {
                           Tensor* ga = pg[0];
                           Tensor* gb = pg[1];
                           const Tensor& ta = a.tensor();
                           const Tensor& tb = b.tensor();
                           for (std::size_t i = 0; i < g.numel(); ++i) {
                             const std::size_t ia = bc->a(i), ib = bc->b(i);
                             const double av = ta[ia], bv = tb[ib];
                             double da = 0.0, db = 0.0;
                             switch (op) {
                               case BinaryOp::Add: da = 1.0; db = 1.0; break;
                               case BinaryOp::Sub: da = 1.0; db = -1.0; break;
                               case BinaryOp::Mul: da = bv; db = av; break;
                               case BinaryOp::Div: {
                                 const double d = clamp_denominator(bv);
                                 da = 1.0 / d;
                                 db = d == bv ? -av / (d * d) : 0.0;
                                 break;
                               }
                               case BinaryOp::Min: (av <= bv ? da : db) = 1.0; break;
                               case BinaryOp::Max: (av >= bv ? da : db) = 1.0; break;
                             }
                             if (ga) (*ga)[ia] += g[i] * da;
                             if (gb) (*gb)[ib] += g[i] * db;
                           }
                         });
}

Value matmul(const Value& a, const Value& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_str(sa) + " x " + shape_str(sb));
  }
  const kernels::MatDims d{sa[0], sa[1], sb[1]};
  Tensor out(Shape{d.m, d.n});
  kernels::matmul(a.tensor().data(), b.tensor().data(), out.data(), d);
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b, d](const Tensor& g, std::span<Tensor* const> pg) {
    if (pg[0]) kernels::matmul_grad_a(g.data(), b.tensor().data(), pg[0]->data(), d);
    if (pg[1]) kernels::matmul_grad_b(a.tensor().data(), g.data(), pg[1]->data(), d);
  });
}

Value reduce(ReduceOp op, const Value& x, std::optional<std::size_t> axis) {
  const Tensor& in = x.tensor();
  AxisSplit s{1, in.numel(), 1};
  Shape out_shape;
  if (axis) {
    if (*axis >= in.rank()) {
      throw std::invalid_argument("reduce: axis " + std::to_string(*axis) + " invalid for shape " + shape_str(in.shape()));
    }
    s = split_axis(in.shape(), *axis);
    out_shape = in.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(*axis));
  }
  if (s.len == 0) throw std::invalid_argument("reduce: empty reduction over shape " + shape_str(in.shape()));

  Tensor out(out_shape);
  // For max/min: flat input index chosen per output element.
  auto picks = std::make_shared<std::vector<std::size_t>>();
  if (op == ReduceOp::Max || op == ReduceOp::Min) picks->resize(out.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      const std::size_t oi = o * s.inner + i;
      if (op == ReduceOp::Sum || op == ReduceOp::Mean) {
        double acc = 0.0;
        for (std::size_t k = 0; k < s.len; ++k) acc += in[base + k * s.inner];
        out[oi] = op == ReduceOp::Mean ? acc / static_cast<double>(s.len) : acc;
      } else {
        std::size_t best = base;
        for (std::size_t k = 1; k < s.len; ++k) {
          const std::size_t j = base + k * s.inner;
          if (op == ReduceOp::Max ? in[j] > in[best] : in[j] < in[best]) best = j;
        }
        (*picks)[oi] = best;
        out[oi] = in[best];
      }
    }
  }
  const char* name = op == ReduceOp::Sum ? "sum" : op == ReduceOp::Mean ? "mean" : op == ReduceOp::Max ? "max" : "min";
  return x.tape().record(name, std::move(out), {x}, [op, s, picks](const Tensor& g, std::span<Tensor* const> pg) {
    Tensor* gx = pg[0];
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.len * s.inner + i;
        const std::size_t oi = o * s.inner + i;
        if (op == ReduceOp::Sum || op == ReduceOp::Mean) {
          const double v = op == ReduceOp::Mean ? g[oi] / static_cast<double>(s.len) : g[oi];
          for (std::size_t k = 0; k < s.len; ++k) (*gx)[base + k * s.inner] += v;
        } else {
          (*gx)[(*picks)[oi]] += g[oi];
        }
      }
    }
  });
}

Value detach(const Value& x) { return x.tape().constant(x.tensor()); }

Value pow(const Value& x, double exponent) {
  const Tensor& in = x.tensor();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::pow(in[i], exponent);
  return x.tape().record("pow", std::move(out), {x}, [x, exponent](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    const Tensor& in = x.tensor();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      (*pg[0])[i] += g[i] * exponent * std::pow(in[i], exponent - 1.0);
    }
  });
}

Value clamp(const Value& x, double lo, double hi) {
  const Tensor& in = x.tensor();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::clamp(in[i], lo, hi);
  return x.tape().record("clamp", std::move(out), {x}, [x, lo, hi](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    const Tensor& in = x.tensor();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (in[i] >= lo && in[i] <= hi) (*pg[0])[i] += g[i];
    }
  });
}

Value reshape(const Value& x, Shape shape) {
  Tensor out = x.tensor().reshaped(std::move(shape));
  return x.tape().record("reshape", std::move(out), {x}, [](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t i = 0; i < g.numel(); ++i) (*pg[0])[i] += g[i];
  });
}

Value slice(const Value& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& in = x.tensor();
  if (axis >= in.rank() || begin > end || end > in.dim(axis)) {
    throw std::invalid_argument("slice: [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                                std::to_string(axis) + " of " + shape_str(in.shape()));
  }
  const AxisSplit s = split_axis(in.shape(), axis);
  Shape shape = in.shape();
  shape[axis] = end - begin;
  Tensor out(shape);
  const std::size_t w = (end - begin) * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>(o * s.len * s.inner + begin * s.inner), w,
                out.data().begin() + static_cast<std::ptrdiff_t>(o * w));
  }
  return x.tape().record("slice", std::move(out), {x}, [s, begin, w](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t k = 0; k < w; ++k) (*pg[0])[o * s.len * s.inner + begin * s.inner + k] += g[o * w + k];
    }
  });
}

Value concat(std::span<const Value> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range for " + shape_str(first));
  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const Value& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) throw std::invalid_argument("concat: rank mismatch " + shape_str(s));
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw std::invalid_argument("concat: shapes " + shape_str(first) + " and " + shape_str(s) + " differ");
      }
    }
    shape[axis] += s[axis];
  }
  const AxisSplit s = split_axis(shape, axis);
  for (const Value& p : parts) widths.push_back(p.shape()[axis] * s.inner);
  const std::size_t row = s.len * s.inner;
  Tensor out(shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& in = parts[k].tensor();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < widths[k]; ++j) out[o * row + off + j] = in[o * widths[k] + j];
    }
    off += widths[k];
  }
  std::vector<Value> parents(parts.begin(), parts.end());
  return parts[0].tape().record("concat", std::move(out), std::move(parents),
                                [s, row, widths](const Tensor& g, std::span<Tensor* const> pg) {
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < pg.size(); ++k) {
                                    if (pg[k]) {
                                      for (std::size_t o = 0; o < s.outer; ++o) {
                                        for (std::size_t j = 0; j < widths[k]; ++j) {
                                          (*pg[k])[o * widths[k] + j] += g[o * row + off + j];
                                        }
                                      }
                                    }
                                    off += widths[k];
                                  }
                                });
}

Value gather(const Value& x, std::span<const std::size_t> rows) {
  const Tensor& in = x.tensor();
  if (in.rank() == 0) throw std::invalid_argument("gather: scalar input");
  const std::size_t n_rows = in.dim(0);
  const std::size_t w = n_rows ? in.numel() / n_rows : 0;
  Shape shape = in.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n_rows) {
      throw std::out_of_range("gather: row " + std::to_string(rows[r]) + " of " + shape_str(in.shape()));
    }
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = in[rows[r] * w + j];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return x.tape().record("gather", std::move(out), {x}, [idx, w](const Tensor& g, std::span<Tensor* const> pg) {
    if (!pg[0]) return;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < w; ++j) (*pg[0])[idx[r] * w + j] += g[r * w + j];
    }
  });
}

Value bilinear_sample(const Value& features, const Value& points) {
  const Shape& fs = features.shape();
  const Shape& ps = points.shape();
  if (fs.size() != 3 || ps.size() != 2 || ps[1] != 2) {
    throw std::invalid_argument("bilinear_sample: expected [H,W,C] and [P,2], got " + shape_str(fs) + " and " +
                                shape_str(ps));
  }
  const kernels::GridDims d{fs[0], fs[1], fs[2]};
  Tensor out(Shape{ps[0], d.channels});
  kernels::bilinear_sample(features.tensor().data(), d, points.tensor().data(), out.data());
  return features.tape().record("bilinear_sample", std::move(out), {features, points},
                                [features, points, d](const Tensor& g, std::span<Tensor* const> pg) {
                                  kernels::bilinear_sample_grad(
                                      features.tensor().data(), d, points.tensor().data(), g.data(),
                                      pg[0] ? pg[0]->data() : std::span<double>{},
                                      pg[1] ? pg[1]->data() : std::span<double>{});
                                });
}

Value operator+(const Value& a, const Value& b) { return binary(BinaryOp::Add, a, b); }
Value operator-(const Value& a, const Value& b) { return binary(BinaryOp::Sub, a, b); }
Value operator*(const Value& a, const Value& b) { return binary(BinaryOp::Mul, a, b); }
Value operator/(const Value& a, const Value& b) { return binary(BinaryOp::Div, a, b); }
Value operator-(const Value& x) { return neg(x); }
Value operator+(const Value& a, double b) { return a + a.tape().constant(b); }
Value operator+(double a, const Value& b) { return b.tape().constant(a) + b; }
Value operator-(const Value& a, double b) { return a - a.tape().constant(b); }
Value operator-(double a, const Value& b) { return b.tape().constant(a) - b; }
Value operator*(const Value& a, double b) { return a * a.tape().constant(b); }
Value operator*(double a, const Value& b) { return b.tape().constant(a) * b; }
Value operator/(const Value& a, double b) { return a / a.tape().constant(b); }
Value operator/(double a, const Value& b) { return b.tape().constant(a) / b; }

GradCheckResult grad_check(const TapeFunction& f, std::span<const Tensor> params, double h) {
  if (!(h > 0)) throw std::invalid_argument("grad_check: step must be positive");
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Value> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p, true));
    const Value loss = f(tape, leaves);
    if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite function value");
    const GradientStore store = tape.backward(loss);
    for (const Value& leaf : leaves) analytic.push_back(store.get_or_zero(leaf));
  }

  std::vector<Tensor> work(params.begin(), params.end());
  auto eval = [&] {
    Tape tape;
    std::vector<Value> leaves;
    for (const Tensor& p : work) leaves.push_back(tape.constant(p));
    const double v = f(tape, leaves).item();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite function value");
    return v;
  };

  GradCheckResult result;
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t i = 0; i < work[p].numel(); ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + h;
      const double up = eval();
      work[p][i] = orig - h;
      const double down = eval();
      work[p][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.coordinates;
      if (rel > result.max_rel_error) {
        result = GradCheckResult{rel, p, i, a, numeric, result.coordinates};
      }
    }
  }
  return result;
}

}  // namespace rtrack
