#include "ctxslu/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxslu/error.hpp"

namespace ctxslu::ad {

namespace {

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw DimensionError(std::string(op) + ": " + detail);
}

}  // namespace

Tape::Tape() {
  nodes_.reserve(1024);
  inputs_.reserve(2048);
  vals_.reserve(1 << 15);
}

void Tape::clear() {
  nodes_.clear();
  inputs_.clear();
  vals_.clear();
  grads_.clear();
  aux_.clear();
  customs_.clear();
}

std::size_t Tape::alloc(std::size_t n) {
  const std::size_t off = vals_.size();
  vals_.resize(off + n);
  return off;
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw UsageError("variable does not belong to this tape");
  return nodes_[v.id];
}

const double* Tape::vptr(const Node& n) const {
  return n.op == Op::Leaf ? n.param->values().data() : vals_.data() + n.offset;
}

double* Tape::gptr(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.op == Op::Leaf) return n.param->grad().data();
  return grads_.data() + n.offset;
}

bool Tape::any_needs_grad(std::span<const Var> inputs) const {
  return std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return node(v).needs_grad; });
}

std::size_t Tape::matrix_cols(const Node& n) const {
  if (n.op != Op::Leaf || n.param->shape().size() != 2)
    throw DimensionError("matvec: matrix operand must be a 2-D parameter leaf");
  return n.param->cols();
}

void Tape::check_finite(const Node& n, const char* op) const {
  const double* p = vptr(n);
  for (std::size_t i = 0; i < n.size; ++i)
    if (!std::isfinite(p[i])) throw NumericError(std::string("non-finite value produced by ") + op);
}

Var Tape::push(Node n, std::span<const Var> inputs) {
  n.in_begin = static_cast<std::uint32_t>(inputs_.size());
  n.in_count = static_cast<std::uint32_t>(inputs.size());
  inputs_.insert(inputs_.end(), inputs.begin(), inputs.end());
  nodes_.push_back(n);
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {vptr(n), n.size};
}

double Tape::item(Var v) const {
  const Node& n = node(v);
  if (n.size != 1) throw DimensionError("item() on a value of size " + std::to_string(n.size));
  return vptr(n)[0];
}

std::size_t Tape::dim(Var v) const { return node(v).size; }

std::span<const double> Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.op == Op::Leaf) return n.param->grad();
  if (grads_.size() < n.offset + n.size) return {};
  return {grads_.data() + n.offset, n.size};
}

// ---------------------------------------------------------------------------
// Sources

Var Tape::leaf(Tensor& param) {
  Node n{.op = Op::Leaf};
  n.size = param.size();
  n.param = &param;
  n.needs_grad = param.requires_grad();
  return push(n, {});
}

Var Tape::constant(std::span<const double> values) {
  if (values.empty()) throw DimensionError("constant: empty value");
  Node n{.op = Op::Constant};
  n.size = values.size();
  n.offset = alloc(n.size);
  std::copy(values.begin(), values.end(), vals_.begin() + static_cast<std::ptrdiff_t>(n.offset));
  check_finite(n, "constant");
  return push(n, {});
}

Var Tape::zeros(std::size_t n_values) {
  if (n_values == 0) throw DimensionError("zeros: empty value");
  Node n{.op = Op::Constant};
  n.size = n_values;
  n.offset = alloc(n.size);
  return push(n, {});
}

Var Tape::scalar(double v) { return constant(std::span<const double>(&v, 1)); }

// ---------------------------------------------------------------------------
// Linear maps

Var Tape::matvec(Var m, Var x) {
  const Node& mn = node(m);
  const std::size_t cols = matrix_cols(mn);
  require(node(x).size == cols, "matvec",
          "matrix " + shape_string(mn.param->shape()) + " vs vector " + std::to_string(node(x).size));
  return matvec_cols(m, x, 0);
}

Var Tape::matvec_cols(Var m, Var x, std::size_t offset) {
  const Var ins[] = {m, x};
  const Node& mn = node(m);
  const std::size_t cols = matrix_cols(mn);
  const std::size_t rows = mn.param->rows();
  const std::size_t len = node(x).size;
  require(offset + len <= cols, "matvec_cols", "column window exceeds matrix width");
  Node n{.op = Op::MatVecCols};
  n.size = rows;
  n.aux = offset;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(rows);
  const double* mv = vptr(nodes_[m.id]);
  const double* xv = vptr(nodes_[x.id]);
  double* out = vals_.data() + n.offset;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = mv + r * cols + offset;
    double acc = 0.0;
    for (std::size_t j = 0; j < len; ++j) acc += row[j] * xv[j];
    out[r] = acc;
  }
  check_finite(n, "matvec");
  return push(n, ins);
}

// ---------------------------------------------------------------------------
// Elementwise

Var Tape::add(Var a, Var b) {
  const Var ins[] = {a, b};
  return add(ins);
}

Var Tape::add(std::span<const Var> terms) {
  require(!terms.empty(), "add", "no operands");
  const std::size_t size = node(terms[0]).size;
  for (Var t : terms) require(node(t).size == size, "add", "operand sizes differ");
  Node n{.op = Op::Add};
  n.size = size;
  n.needs_grad = any_needs_grad(terms);
  n.offset = alloc(size);
  double* out = vals_.data() + n.offset;
  const double* first = vptr(nodes_[terms[0].id]);
  std::copy(first, first + size, out);
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const double* p = vptr(nodes_[terms[k].id]);
    for (std::size_t i = 0; i < size; ++i) out[i] += p[i];
  }
  check_finite(n, "add");
  return push(n, terms);
}

Var Tape::mul(Var a, Var b) {
  const Var ins[] = {a, b};
  require(node(a).size == node(b).size, "mul", "operand sizes differ");
  Node n{.op = Op::Mul};
  n.size = node(a).size;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(n.size);
  const double* av = vptr(nodes_[a.id]);
  const double* bv = vptr(nodes_[b.id]);
  double* out = vals_.data() + n.offset;
  for (std::size_t i = 0; i < n.size; ++i) out[i] = av[i] * bv[i];
  check_finite(n, "mul");
  return push(n, ins);
}

Var Tape::scale(Var a, double s) {
  const Var ins[] = {a};
  Node n{.op = Op::Scale};
  n.size = node(a).size;
  n.scalar = s;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(n.size);
  const double* av = vptr(nodes_[a.id]);
  double* out = vals_.data() + n.offset;
  for (std::size_t i = 0; i < n.size; ++i) out[i] = s * av[i];
  check_finite(n, "scale");
  return push(n, ins);
}

Var Tape::tanh(Var a) {
  const Var ins[] = {a};
  Node n{.op = Op::Tanh};
  n.size = node(a).size;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(n.size);
  const double* av = vptr(nodes_[a.id]);
  double* out = vals_.data() + n.offset;
  for (std::size_t i = 0; i < n.size; ++i) out[i] = std::tanh(av[i]);
  check_finite(n, "tanh");
  return push(n, ins);
}

Var Tape::sigmoid(Var a) {
  const Var ins[] = {a};
  Node n{.op = Op::Sigmoid};
  n.size = node(a).size;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(n.size);
  const double* av = vptr(nodes_[a.id]);
  double* out = vals_.data() + n.offset;
  for (std::size_t i = 0; i < n.size; ++i) out[i] = logistic(av[i]);
  check_finite(n, "sigmoid");
  return push(n, ins);
}

// ---------------------------------------------------------------------------
// Structural

Var Tape::concat(Var a, Var b) {
  const Var ins[] = {a, b};
  return concat(ins);
}

Var Tape::concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat", "no operands");
  Node n{.op = Op::Concat};
  for (Var p : parts) n.size += node(p).size;
  n.needs_grad = any_needs_grad(parts);
  n.offset = alloc(n.size);
  double* out = vals_.data() + n.offset;
  for (Var p : parts) {
    const Node& pn = nodes_[p.id];
    const double* pv = vptr(pn);
    out = std::copy(pv, pv + pn.size, out);
  }
  return push(n, parts);
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  const Var ins[] = {a};
  require(length > 0 && offset + length <= node(a).size, "slice", "range out of bounds");
  Node n{.op = Op::Slice};
  n.size = length;
  n.aux = offset;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(length);
  const double* av = vptr(nodes_[a.id]) + offset;
  std::copy(av, av + length, vals_.begin() + static_cast<std::ptrdiff_t>(n.offset));
  return push(n, ins);
}

// ---------------------------------------------------------------------------
// Reductions

Var Tape::dot(Var a, Var b) {
  const Var ins[] = {a, b};
  require(node(a).size == node(b).size, "dot", "operand sizes differ");
  Node n{.op = Op::Dot};
  n.size = 1;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(1);
  const double* av = vptr(nodes_[a.id]);
  const double* bv = vptr(nodes_[b.id]);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].size; ++i) acc += av[i] * bv[i];
  vals_[n.offset] = acc;
  check_finite(n, "dot");
  return push(n, ins);
}

Var Tape::sum(Var a) {
  const Var ins[] = {a};
  Node n{.op = Op::Sum};
  n.size = 1;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(1);
  const double* av = vptr(nodes_[a.id]);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].size; ++i) acc += av[i];
  vals_[n.offset] = acc;
  check_finite(n, "sum");
  return push(n, ins);
}

Var Tape::masked_softmax(Var scores, const std::vector<bool>& mask) {
  const Var ins[] = {scores};
  const std::size_t size = node(scores).size;
  require(mask.size() == size, "masked_softmax", "mask length differs from scores");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw EmptyInputError("masked_softmax: every entry is masked out");
  Node n{.op = Op::MaskedSoftmax};
  n.size = size;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(size);
  const double* s = vptr(nodes_[scores.id]);
  double* out = vals_.data() + n.offset;
  double mx = -INFINITY;
  for (std::size_t i = 0; i < size; ++i)
    if (mask[i]) mx = std::max(mx, s[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    out[i] = mask[i] ? std::exp(s[i] - mx) : 0.0;
    z += out[i];
  }
  for (std::size_t i = 0; i < size; ++i) out[i] /= z;
  check_finite(n, "masked_softmax");
  return push(n, ins);
}

Var Tape::embedding(Tensor& table, std::size_t index) {
  if (table.shape().size() != 2) throw DimensionError("embedding: table must be 2-D");
  if (index >= table.cols())
    throw IndexError("embedding: index " + std::to_string(index) + " out of range for " +
                     std::to_string(table.cols()) + " columns");
  Node n{.op = Op::Embedding};
  n.size = table.rows();
  n.aux = index;
  n.param = &table;
  n.needs_grad = table.requires_grad();
  n.offset = alloc(n.size);
  const std::size_t cols = table.cols();
  const double* tv = table.values().data();
  double* out = vals_.data() + n.offset;
  for (std::size_t r = 0; r < n.size; ++r) out[r] = tv[r * cols + index];
  return push(n, {});
}

Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
  require(!vectors.empty(), "weighted_sum", "no vectors");
  require(node(weights).size == vectors.size(), "weighted_sum", "one weight per vector required");
  const std::size_t size = node(vectors[0]).size;
  for (Var v : vectors) require(node(v).size == size, "weighted_sum", "vector sizes differ");
  std::vector<Var> ins;
  ins.reserve(vectors.size() + 1);
  ins.push_back(weights);
  ins.insert(ins.end(), vectors.begin(), vectors.end());
  Node n{.op = Op::WeightedSum};
  n.size = size;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(size);
  const double* w = vptr(nodes_[weights.id]);
  double* out = vals_.data() + n.offset;
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const double* v = vptr(nodes_[vectors[k].id]);
    for (std::size_t i = 0; i < size; ++i) out[i] += w[k] * v[i];
  }
  check_finite(n, "weighted_sum");
  return push(n, ins);
}

// ---------------------------------------------------------------------------
// Losses

Var Tape::bce_with_logits(Var logits, std::span<const double> targets) {
  const Var ins[] = {logits};
  const std::size_t size = node(logits).size;
  require(targets.size() == size, "bce_with_logits", "target count differs from logits");
  Node n{.op = Op::Bce};
  n.size = 1;
  n.needs_grad = any_needs_grad(ins);
  n.aux_begin = aux_.size();
  aux_.insert(aux_.end(), targets.begin(), targets.end());
  n.offset = alloc(1);
  const double* z = vptr(nodes_[logits.id]);
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i)
    acc += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  vals_[n.offset] = acc / static_cast<double>(size);
  check_finite(n, "bce_with_logits");
  return push(n, ins);
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t target) {
  const Var ins[] = {logits};
  const std::size_t size = node(logits).size;
  if (target >= size) throw IndexError("softmax_cross_entropy: target out of range");
  Node n{.op = Op::SoftmaxXent};
  n.size = 1;
  n.aux = target;
  n.needs_grad = any_needs_grad(ins);
  n.offset = alloc(1);
  const double* z = vptr(nodes_[logits.id]);
  const double mx = *std::max_element(z, z + size);
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) s += std::exp(z[i] - mx);
  vals_[n.offset] = mx + std::log(s) - z[target];
  check_finite(n, "softmax_cross_entropy");
  return push(n, ins);
}

Var Tape::custom(std::span<const Var> inputs, std::span<const double> output, CustomBackward backward) {
  require(!output.empty(), "custom", "empty output");
  Node n{.op = Op::Custom};
  n.size = output.size();
  n.aux = customs_.size();
  n.needs_grad = any_needs_grad(inputs);
  n.offset = alloc(n.size);
  std::copy(output.begin(), output.end(), vals_.begin() + static_cast<std::ptrdiff_t>(n.offset));
  customs_.push_back(std::move(backward));
  check_finite(n, "custom");
  return push(n, inputs);
}

// ---------------------------------------------------------------------------
// Backward

void Tape::backward(Var loss, double seed) {
  const Node& ln = node(loss);
  if (ln.size != 1) throw UsageError("backward: loss must be a scalar, got size " + std::to_string(ln.size));
  grads_.assign(vals_.size(), 0.0);
  if (!ln.needs_grad) return;
  if (ln.op == Op::Leaf) {
    ln.param->grad()[0] += seed;
    return;
  }
  grads_[ln.offset] = seed;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.needs_grad || n.op == Op::Leaf || n.op == Op::Constant) continue;
    const double* g = grads_.data() + n.offset;
    const double* y = vals_.data() + n.offset;

    switch (n.op) {
      case Op::MatVecCols: {
        const Var m = input(n, 0), x = input(n, 1);
        const Node& mn = nodes_[m.id];
        const std::size_t cols = mn.param->cols();
        const std::size_t len = nodes_[x.id].size;
        const double* mv = vptr(mn);
        const double* xv = vptr(nodes_[x.id]);
        if (double* dm = gptr(m.id)) {
          for (std::size_t r = 0; r < n.size; ++r) {
            if (g[r] == 0.0) continue;
            double* row = dm + r * cols + n.aux;
            for (std::size_t j = 0; j < len; ++j) row[j] += g[r] * xv[j];
          }
        }
        if (double* dx = gptr(x.id)) {
          for (std::size_t r = 0; r < n.size; ++r) {
            const double* row = mv + r * cols + n.aux;
            for (std::size_t j = 0; j < len; ++j) dx[j] += row[j] * g[r];
          }
        }
        break;
      }
      case Op::Add:
        for (std::uint32_t k = 0; k < n.in_count; ++k)
          if (double* d = gptr(input(n, k).id))
            for (std::size_t i = 0; i < n.size; ++i) d[i] += g[i];
        break;
      case Op::Mul: {
        const Var a = input(n, 0), b = input(n, 1);
        const double* av = vptr(nodes_[a.id]);
        const double* bv = vptr(nodes_[b.id]);
        if (double* da = gptr(a.id))
          for (std::size_t i = 0; i < n.size; ++i) da[i] += g[i] * bv[i];
        if (double* db = gptr(b.id))
          for (std::size_t i = 0; i < n.size; ++i) db[i] += g[i] * av[i];
        break;
      }
      case Op::Scale:
        if (double* d = gptr(input(n, 0).id))
          for (std::size_t i = 0; i < n.size; ++i) d[i] += n.scalar * g[i];
        break;
      case Op::Tanh:
        if (double* d = gptr(input(n, 0).id))
          for (std::size_t i = 0; i < n.size; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      case Op::Sigmoid:
        if (double* d = gptr(input(n, 0).id))
          for (std::size_t i = 0; i < n.size; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case Op::Concat: {
        std::size_t at = 0;
        for (std::uint32_t k = 0; k < n.in_count; ++k) {
          const Var p = input(n, k);
          const std::size_t len = nodes_[p.id].size;
          if (double* d = gptr(p.id))
            for (std::size_t i = 0; i < len; ++i) d[i] += g[at + i];
          at += len;
        }
        break;
      }
      case Op::Slice:
        if (double* d = gptr(input(n, 0).id))
          for (std::size_t i = 0; i < n.size; ++i) d[n.aux + i] += g[i];
        break;
      case Op::Dot: {
        const Var a = input(n, 0), b = input(n, 1);
        const std::size_t len = nodes_[a.id].size;
        const double* av = vptr(nodes_[a.id]);
        const double* bv = vptr(nodes_[b.id]);
        if (double* da = gptr(a.id))
          for (std::size_t i = 0; i < len; ++i) da[i] += g[0] * bv[i];
        if (double* db = gptr(b.id))
          for (std::size_t i = 0; i < len; ++i) db[i] += g[0] * av[i];
        break;
      }
      case Op::Sum: {
        const Var a = input(n, 0);
        if (double* d = gptr(a.id))
          for (std::size_t i = 0; i < nodes_[a.id].size; ++i) d[i] += g[0];
        break;
      }
      case Op::MaskedSoftmax: {
        if (double* d = gptr(input(n, 0).id)) {
          double gy = 0.0;
          for (std::size_t i = 0; i < n.size; ++i) gy += g[i] * y[i];
          for (std::size_t i = 0; i < n.size; ++i) d[i] += y[i] * (g[i] - gy);
        }
        break;
      }
      case Op::Embedding: {
        const std::size_t cols = n.param->cols();
        double* d = n.param->grad().data();
        for (std::size_t r = 0; r < n.size; ++r) d[r * cols + n.aux] += g[r];
        break;
      }
      case Op::WeightedSum: {
        const Var w = input(n, 0);
        const double* wv = vptr(nodes_[w.id]);
        double* dw = gptr(w.id);
        for (std::uint32_t k = 1; k < n.in_count; ++k) {
          const Var v = input(n, k);
          const double* vv = vptr(nodes_[v.id]);
          if (dw) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n.size; ++i) acc += g[i] * vv[i];
            dw[k - 1] += acc;
          }
          if (double* dv = gptr(v.id))
            for (std::size_t i = 0; i < n.size; ++i) dv[i] += wv[k - 1] * g[i];
        }
        break;
      }
      case Op::Bce: {
        const Var z = input(n, 0);
        const std::size_t len = nodes_[z.id].size;
        const double* zv = vptr(nodes_[z.id]);
        const double* t = aux_.data() + n.aux_begin;
        if (double* d = gptr(z.id))
          for (std::size_t i = 0; i < len; ++i)
            d[i] += g[0] * (logistic(zv[i]) - t[i]) / static_cast<double>(len);
        break;
      }
      case Op::SoftmaxXent: {
        const Var z = input(n, 0);
        const std::size_t len = nodes_[z.id].size;
        const double* zv = vptr(nodes_[z.id]);
        if (double* d = gptr(z.id)) {
          const double mx = *std::max_element(zv, zv + len);
          double s = 0.0;
          for (std::size_t i = 0; i < len; ++i) s += std::exp(zv[i] - mx);
          for (std::size_t i = 0; i < len; ++i)
            d[i] += g[0] * (std::exp(zv[i] - mx) / s - (i == n.aux ? 1.0 : 0.0));
        }
        break;
      }
      case Op::Custom: {
        std::vector<std::span<double>> in_grads(n.in_count);
        for (std::uint32_t k = 0; k < n.in_count; ++k) {
          const Var v = input(n, k);
          if (double* d = gptr(v.id)) in_grads[k] = {d, nodes_[v.id].size};
        }
        customs_[n.aux](std::span<const double>(g, n.size), in_grads);
        break;
      }
      case Op::Leaf:
      case Op::Constant:
        break;
    }
  }
}

}  // namespace ctxslu::ad
