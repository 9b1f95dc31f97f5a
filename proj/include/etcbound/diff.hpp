#pragma once

// Reverse-mode differentiation over scalars with a few fused vector
// primitives. A Tape records nodes in creation order; each node stores its
// value and the local partial derivative towards every operand, so a single
// reverse sweep produces all adjoints.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace etcbound::diff {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
// has not been cleared.
class Var {
 public:
  Var() = default;

  double value() const;
  double adjoint() const;
  std::uint32_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

struct Edge {
  Var parent;
  double partial;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);
  // A node with no operands. Gets an adjoint but nothing propagates from it.
  Var constant(double value) { return variable(value); }

  // Records a node with explicit local partials. Building block for every
  // primitive, also usable for fused ops defined outside this header.
  Var push(double value, std::span<const Edge> edges);
  Var push(double value, std::initializer_list<Edge> edges) {
    return push(value, std::span<const Edge>(edges.begin(), edges.size()));
  }

  double value(Var v) const { return values_[v.index()]; }
  double adjoint(Var v) const { return adjoints_[v.index()]; }

  // Zeroes adjoints, seeds d(root)/d(root) = 1, and sweeps in reverse order.
  void backward(Var root);

  void clear();
  std::size_t size() const { return values_.size(); }
  std::size_t num_edges() const { return parents_.size(); }

  // Smallest |x - k| passed through floor_at(x, k) since the last clear().
  double min_kink_distance() const { return min_kink_distance_; }
  void note_kink_distance(double d);

 private:
  std::vector<double> values_;
  std::vector<double> adjoints_;
  std::vector<std::uint32_t> edge_begin_{0};
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
  double min_kink_distance_ = std::numeric_limits<double>::infinity();
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double b);
Var operator+(double a, Var b);
Var operator-(Var a, double b);
Var operator-(double a, Var b);
Var operator*(Var a, double b);
Var operator*(double a, Var b);
Var operator/(Var a, double b);

Var exp(Var x);
Var log(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
Var square(Var x);

// max(x, k). At x == k the subgradient is 0: the hinge counts as flat.
Var floor_at(Var x, double k);

// Value passes through, adjoint does not.
Var stop_gradient(Var x);

Var sum(std::span<const Var> xs);
Var mean(std::span<const Var> xs);
// sum_i w_i * x_i
Var weighted_sum(std::span<const Var> xs, std::span<const double> weights);
Var dot(std::span<const Var> a, std::span<const Var> b);
// sum_i w_i v_i / sum_i w_i with learnable weights and constant values.
// Throws DomainError when the weights sum to zero.
Var weighted_mean(std::span<const Var> weights, std::span<const double> values);
// Cosine similarity. Defined as 0 (with zero partials) if either side has
// zero norm.
Var cosine(std::span<const Var> a, std::span<const double> b);
Var cosine(std::span<const Var> a, std::span<const Var> b);

double sigmoid_value(double x);
double cosine_value(std::span<const double> a, std::span<const double> b);

// Reverse-mode versus central finite differences.
struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double scale_floor = 1e-3;
};

struct GradCheckReport {
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<std::size_t> failing;
  double max_rel_error = 0.0;
  double min_kink_distance = std::numeric_limits<double>::infinity();
  double value = 0.0;

  bool passed() const { return failing.empty(); }
  std::string summary() const;
};

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

GradCheckReport grad_check(const ScalarFn& f, std::span<const double> x,
                           const GradCheckOptions& options = {});

}  // namespace etcbound::diff
