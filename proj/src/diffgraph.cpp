#include "baryvae/diffgraph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "baryvae/errors.hpp"
#include "baryvae/kernels.hpp"

namespace baryvae::ad {

std::size_t Value::rows() const { return tape_->node(id_).value.rows; }
std::size_t Value::cols() const { return tape_->node(id_).value.cols; }
const Matrix& Value::data() const { return tape_->node(id_).value; }
const Matrix& Value::grad() const { return tape_->node(id_).grad; }

double Value::item() const {
  const Matrix& m = data();
  if (m.size() != 1) throw DimensionError("item() on a non-scalar value");
  return m.data[0];
}

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(const std::string& name, Matrix init) {
  if (lookup_.count(name)) throw InvalidArgument("duplicate parameter " + name);
  lookup_.emplace(name, entries_.size());
  Matrix zeros(init.rows, init.cols);
  entries_.push_back({name, std::move(init), zeros, zeros});
}

bool ParamStore::contains(const std::string& name) const {
  return lookup_.count(name) != 0;
}

std::size_t ParamStore::index(const std::string& name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) throw InvalidArgument("unknown parameter " + name);
  return it->second;
}

const Matrix& ParamStore::value(const std::string& name) const {
  return entries_[index(name)].value;
}

Matrix& ParamStore::value(const std::string& name) {
  return entries_[index(name)].value;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Tape

Value Tape::constant(Matrix m) { return push(std::move(m), {}, nullptr); }

Value Tape::param(const ParamStore& store, const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Value(this, it->second);
  Value v = push(store.value(name), {}, nullptr);
  nodes_[v.id()].param_name = name;
  param_nodes_.emplace(name, v.id());
  return v;
}

Value Tape::push(Matrix value, std::vector<std::size_t> parents,
                 BackwardFn backward) {
  nodes_.push_back({std::move(value), Matrix(), std::move(parents),
                    std::move(backward), {}});
  return Value(this, nodes_.size() - 1);
}

void Tape::backward(Value loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw DimensionError("backward: loss must be a scalar");
  }
  if (backward_done_) throw InvalidArgument("backward: tape already differentiated");
  backward_done_ = true;
  for (auto& n : nodes_) n.grad = Matrix(n.value.rows, n.value.cols);
  nodes_[loss.id()].grad.data[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
  }
}

Gradients Tape::param_gradients() const {
  Gradients out;
  for (const auto& [name, id] : param_nodes_) out.emplace(name, nodes_[id].grad);
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

void same_tape(Value a, Value b) {
  if (&a.tape() != &b.tape()) throw InvalidArgument("values live on different tapes");
}

void same_shape(Value a, Value b, const char* op) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
  }
}

// Elementwise op whose derivative is expressed through input x and output y.
template <class F, class D>
Value elementwise(Value a, F f, D dfdx) {
  Tape& t = a.tape();
  Matrix out = a.data();
  for (double& v : out.data) v = f(v);
  const std::size_t ia = a.id();
  return t.push(std::move(out), {ia}, [ia, dfdx](Tape& tp, std::size_t self) {
    const Matrix& x = tp.node(ia).value;
    const Matrix& y = tp.node(self).value;
    const Matrix& g = tp.node(self).grad;
    Matrix& ga = tp.node(ia).grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.data[i] += g.data[i] * dfdx(x.data[i], y.data[i]);
    }
  });
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Value matmul(Value a, Value b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ (" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix out(n, m);
  kernels::matmul(a.data().data, b.data().data, out.data, n, k, m);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib},
                       [ia, ib, n, k, m](Tape& t, std::size_t self) {
    const Matrix& g = t.node(self).grad;
    Matrix da(n, k), db(k, m);
    kernels::matmul_nt(g.data, t.node(ib).value.data, da.data, n, m, k);
    kernels::matmul_tn(t.node(ia).value.data, g.data, db.data, k, n, m);
    auto& ga = t.node(ia).grad.data;
    auto& gb = t.node(ib).grad.data;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += da.data[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += db.data[i];
  });
}

namespace {

template <class F>
Value binary_same_shape(Value a, Value b, const char* op, F f, bool is_mul,
                        double sign_b) {
  same_shape(a, b, op);
  Matrix out = a.data();
  const Matrix& bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(out.data[i], bd.data[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib},
                       [ia, ib, is_mul, sign_b](Tape& t, std::size_t self) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(ia).value;
    const Matrix& bv = t.node(ib).value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (is_mul) {
        t.node(ia).grad.data[i] += g.data[i] * bv.data[i];
        t.node(ib).grad.data[i] += g.data[i] * av.data[i];
      } else {
        t.node(ia).grad.data[i] += g.data[i];
        t.node(ib).grad.data[i] += sign_b * g.data[i];
      }
    }
  });
}

}  // namespace

Value add(Value a, Value b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; }, false, 1.0);
}

Value sub(Value a, Value b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; }, false, -1.0);
}

Value mul(Value a, Value b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; }, true, 0.0);
}

Value add_row(Value a, Value bias) {
  same_tape(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_row: bias must be 1x" + std::to_string(a.cols()));
  }
  Matrix out = a.data();
  const Matrix& bv = bias.data();
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += bv.data[c];
  }
  const std::size_t ia = a.id(), ib = bias.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(ia).grad;
    Matrix& gb = t.node(ib).grad;
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        ga(r, c) += g(r, c);
        gb.data[c] += g(r, c);
      }
    }
  });
}

Value scale(Value a, double s) {
  return elementwise(a, [s](double x) { return s * x; },
                     [s](double, double) { return s; });
}

Value add_scalar(Value a, double s) {
  return elementwise(a, [s](double x) { return x + s; },
                     [](double, double) { return 1.0; });
}

Value tanh(Value a) {
  return elementwise(a, [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Value relu(Value a) {
  return elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value softplus(Value a) {
  return elementwise(a, stable_softplus,
                     [](double x, double) { return stable_sigmoid(x); });
}

Value sigmoid(Value a) {
  return elementwise(a, stable_sigmoid,
                     [](double, double y) { return y * (1.0 - y); });
}

Value exp(Value a) {
  return elementwise(a, [](double x) { return std::exp(x); },
                     [](double, double y) { return y; });
}

Value log(Value a) {
  return elementwise(a, [](double x) { return std::log(x); },
                     [](double x, double) { return 1.0 / x; });
}

Value sqrt(Value a) {
  return elementwise(a, [](double x) { return std::sqrt(x); },
                     [](double, double y) { return 0.5 / y; });
}

Value reciprocal(Value a) {
  return elementwise(a, [](double x) { return 1.0 / x; },
                     [](double, double y) { return -y * y; });
}

Value square(Value a) {
  return elementwise(a, [](double x) { return x * x; },
                     [](double x, double) { return 2.0 * x; });
}

Value unary(Value a, std::function<double(double)> f,
            std::function<double(double)> df) {
  return elementwise(a, f, [df](double x, double) { return df(x); });
}

Value sum(Value a) {
  double s = 0.0;
  for (double v : a.data().data) s += v;
  const std::size_t ia = a.id();
  return a.tape().push(Matrix(1, 1, s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.node(self).grad.data[0];
    for (double& v : t.node(ia).grad.data) v += g;
  });
}

Value mean(Value a) {
  if (a.data().size() == 0) throw DimensionError("mean of an empty value");
  return scale(sum(a), 1.0 / static_cast<double>(a.data().size()));
}

Value row_sum(Value a) {
  const Matrix& av = a.data();
  Matrix out(av.rows, 1);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double s = 0.0;
    for (double v : av.row(r)) s += v;
    out.data[r] = s;
  }
  const std::size_t ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(ia).grad;
    for (std::size_t r = 0; r < ga.rows; ++r) {
      for (std::size_t c = 0; c < ga.cols; ++c) ga(r, c) += g.data[r];
    }
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Value& p : parts) {
    same_tape(p, parts.front());
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Value& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p.data()(r, c);
    }
    offset += p.cols();
  }
  return parts.front().tape().push(std::move(out), ids, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.node(self).grad;
    std::size_t off = 0;
    for (std::size_t id : ids) {
      Matrix& gp = t.node(id).grad;
      for (std::size_t r = 0; r < gp.rows; ++r) {
        for (std::size_t c = 0; c < gp.cols; ++c) gp(r, c) += g(r, off + c);
      }
      off += gp.cols;
    }
  });
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t cols = parts.front().cols();
  Matrix out(0, cols);
  std::vector<std::size_t> ids;
  for (const Value& p : parts) {
    same_tape(p, parts.front());
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    out.data.insert(out.data.end(), p.data().data.begin(), p.data().data.end());
    out.rows += p.rows();
    ids.push_back(p.id());
  }
  return parts.front().tape().push(std::move(out), ids, [ids](Tape& t, std::size_t self) {
    const Matrix& g = t.node(self).grad;
    std::size_t off = 0;
    for (std::size_t id : ids) {
      auto& gp = t.node(id).grad.data;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g.data[off + i];
      off += gp.size();
    }
  });
}

Value dense(Tape& tape, const ParamStore& store, const std::string& prefix, Value x) {
  return add_row(matmul(x, tape.param(store, prefix + ".w")),
                 tape.param(store, prefix + ".b"));
}

void init_dense(ParamStore& store, const std::string& prefix, std::size_t fan_in,
                std::size_t fan_out, CounterRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& v : w.data) v = limit * (2.0 * rng.uniform() - 1.0);
  store.add(prefix + ".w", std::move(w));
  store.add(prefix + ".b", Matrix(1, fan_out));
}

// ---------------------------------------------------------------------------
// Drivers

namespace {

double checked_loss(Value loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw DimensionError("graph builder must return a scalar loss");
  }
  const double v = loss.item();
  if (!std::isfinite(v)) throw NumericError("loss is not finite");
  return v;
}

}  // namespace

LossAndGradients forward_backward(const GraphBuilder& build, const ParamStore& store) {
  Tape tape;
  Value loss = build(tape, store);
  LossAndGradients out;
  out.loss = checked_loss(loss);
  tape.backward(loss);
  out.gradients = tape.param_gradients();
  // Parameters the graph never touched have zero gradient.
  for (const auto& e : store.entries()) {
    if (!out.gradients.count(e.name)) {
      out.gradients.emplace(e.name, Matrix(e.value.rows, e.value.cols));
    }
  }
  return out;
}

double forward_only(const GraphBuilder& build, const ParamStore& store) {
  Tape tape;
  return checked_loss(build(tape, store));
}

void adam_step(ParamStore& store, const Gradients& gradients,
               const AdamOptions& options) {
  for (const auto& e : store.entries()) {
    auto it = gradients.find(e.name);
    if (it == gradients.end()) {
      throw InvalidArgument("adam_step: missing gradient for " + e.name);
    }
    if (it->second.rows != e.value.rows || it->second.cols != e.value.cols) {
      throw DimensionError("adam_step: gradient shape mismatch for " + e.name);
    }
  }
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (auto& e : store.entries()) {
    const Matrix& g = gradients.at(e.name);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g.data[i];
      e.m.data[i] = options.beta1 * e.m.data[i] + (1.0 - options.beta1) * gi;
      e.v.data[i] = options.beta2 * e.v.data[i] + (1.0 - options.beta2) * gi * gi;
      const double m_hat = e.m.data[i] / c1;
      const double v_hat = e.v.data[i] / c2;
      e.value.data[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

double grad_check(const GraphBuilder& build, ParamStore& store, double step,
                  std::uint64_t seed, const std::function<void(Gradients&)>& corrupt) {
  LossAndGradients analytic = forward_backward(build, store);
  if (corrupt) corrupt(analytic.gradients);

  struct Coord {
    std::size_t entry;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t e = 0; e < store.size(); ++e) {
    for (std::size_t i = 0; i < store.entries()[e].value.size(); ++i) {
      coords.push_back({e, i});
    }
  }
  if (coords.size() > kGradCheckFullLimit) {
    CounterRng rng(seed, 0x67726164);
    auto perm = rng.permutation(coords.size());
    std::vector<Coord> picked;
    for (std::size_t k = 0; k < kGradCheckSample; ++k) picked.push_back(coords[perm[k]]);
    coords = std::move(picked);
  }

  double worst = 0.0;
  for (const Coord& c : coords) {
    auto& entry = store.entries()[c.entry];
    const double original = entry.value.data[c.index];
    entry.value.data[c.index] = original + step;
    const double plus = forward_only(build, store);
    entry.value.data[c.index] = original - step;
    const double minus = forward_only(build, store);
    entry.value.data[c.index] = original;
    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic.gradients.at(entry.name).data[c.index];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      throw NumericError("grad_check: non-finite gradient for " + entry.name);
    }
    const double err =
        std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace baryvae::ad
