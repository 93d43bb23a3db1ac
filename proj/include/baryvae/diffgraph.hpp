#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "baryvae/matrix.hpp"
#include "baryvae/rng.hpp"

// Reverse-mode differentiation over dense row-major matrices.
namespace baryvae::ad {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Value {
 public:
  Value() = default;

  std::size_t rows() const;
  std::size_t cols() const;
  const Matrix& data() const;
  const Matrix& grad() const;
  double item() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Named parameter tensors in insertion order, with Adam moment buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix m;
    Matrix v;
  };

  void add(const std::string& name, Matrix init);
  bool contains(const std::string& name) const;
  std::size_t index(const std::string& name) const;
  const Matrix& value(const std::string& name) const;
  Matrix& value(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t num_scalars() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> lookup_;
  std::uint64_t step_ = 0;
};

using Gradients = std::map<std::string, Matrix>;

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    std::string param_name;
  };

  Value constant(Matrix m);
  // Leaf bound to a stored parameter; repeated requests share one node.
  Value param(const ParamStore& store, const std::string& name);
  Value push(Matrix value, std::vector<std::size_t> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every node. `loss` must be 1x1.
  void backward(Value loss);
  Gradients param_gradients() const;

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

// Primitives. Shapes are checked at build time (DimensionError).
Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
// a (r x c) + bias (1 x c) broadcast over rows.
Value add_row(Value a, Value bias);
Value scale(Value a, double s);
Value add_scalar(Value a, double s);
Value tanh(Value a);
Value relu(Value a);
Value softplus(Value a);
Value sigmoid(Value a);
Value exp(Value a);
Value log(Value a);
Value sqrt(Value a);
Value reciprocal(Value a);
Value square(Value a);
Value sum(Value a);
Value mean(Value a);
// r x c -> r x 1
Value row_sum(Value a);
Value concat_cols(const std::vector<Value>& parts);
Value concat_rows(const std::vector<Value>& parts);
// Elementwise f with user-supplied derivative df.
Value unary(Value a, std::function<double(double)> f,
            std::function<double(double)> df);

// x W + b with parameters `<prefix>.w` (in x out) and `<prefix>.b` (1 x out).
Value dense(Tape& tape, const ParamStore& store, const std::string& prefix, Value x);
// Adds a dense layer's parameters: weights uniform in +-sqrt(6/(in+out)), zero bias.
void init_dense(ParamStore& store, const std::string& prefix, std::size_t fan_in,
                std::size_t fan_out, CounterRng& rng);

using GraphBuilder = std::function<Value(Tape&, const ParamStore&)>;

struct LossAndGradients {
  double loss = 0.0;
  Gradients gradients;
};

// Builds the graph, checks the loss is a finite scalar and back-propagates.
LossAndGradients forward_backward(const GraphBuilder& build, const ParamStore& store);
double forward_only(const GraphBuilder& build, const ParamStore& store);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Every stored parameter needs a gradient entry.
void adam_step(ParamStore& store, const Gradients& gradients,
               const AdamOptions& options = {});

inline constexpr std::size_t kGradCheckFullLimit = 10000;
inline constexpr std::size_t kGradCheckSample = 256;

// Largest |analytic - numeric| / max(1, |analytic|, |numeric|) over parameter
// coordinates, with central differences of width 2 * step. Above 1e4
// coordinates a seeded sample of 256 is checked. `corrupt` lets callers
// perturb the analytic gradients before comparison.
double grad_check(const GraphBuilder& build, ParamStore& store, double step,
                  std::uint64_t seed = 0,
                  const std::function<void(Gradients&)>& corrupt = {});

}  // namespace baryvae::ad
