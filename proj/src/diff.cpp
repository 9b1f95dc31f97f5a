#include "etcbound/diff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

namespace etcbound::diff {

namespace {

Tape& tape_of(Var a) {
  assert(a.valid());
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  assert(a.valid() && a.tape() == b.tape());
  (void)b;
  return *a.tape();
}

Tape& tape_of(std::span<const Var> xs) {
  if (xs.empty()) throw DomainError("vector op: empty operand");
  return tape_of(xs.front());
}

double norm_value(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double Var::value() const { return tape_->value(*this); }
double Var::adjoint() const { return tape_->adjoint(*this); }

Var Tape::variable(double value) { return push(value, std::span<const Edge>{}); }

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

Var Tape::push(double value, std::span<const Edge> edges) {
  const auto index = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  for (const Edge& e : edges) {
    assert(e.parent.tape() == this && e.parent.index() < index);
    parents_.push_back(e.parent.index());
    partials_.push_back(e.partial);
  }
  edge_begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return Var(this, index);
}

void Tape::backward(Var root) {
  assert(root.tape() == this);
  adjoints_.assign(values_.size(), 0.0);
  adjoints_[root.index()] = 1.0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    const double a = adjoints_[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_begin_[i]; e < edge_begin_[i + 1]; ++e) {
      adjoints_[parents_[e]] += partials_[e] * a;
    }
  }
}

void Tape::clear() {
  values_.clear();
  adjoints_.clear();
  edge_begin_.assign(1, 0);
  parents_.clear();
  partials_.clear();
  min_kink_distance_ = std::numeric_limits<double>::infinity();
}

void Tape::note_kink_distance(double d) { min_kink_distance_ = std::min(min_kink_distance_, d); }

Var operator+(Var a, Var b) { return tape_of(a, b).push(a.value() + b.value(), {{a, 1.0}, {b, 1.0}}); }
Var operator-(Var a, Var b) { return tape_of(a, b).push(a.value() - b.value(), {{a, 1.0}, {b, -1.0}}); }
Var operator*(Var a, Var b) {
  return tape_of(a, b).push(a.value() * b.value(), {{a, b.value()}, {b, a.value()}});
}
Var operator/(Var a, Var b) {
  const double bv = b.value();
  if (bv == 0.0) throw DomainError("div: division by zero");
  const double q = a.value() / bv;
  return tape_of(a, b).push(q, {{a, 1.0 / bv}, {b, -q / bv}});
}
Var operator-(Var a) { return tape_of(a).push(-a.value(), {{a, -1.0}}); }
Var operator+(Var a, double b) { return tape_of(a).push(a.value() + b, {{a, 1.0}}); }
Var operator+(double a, Var b) { return b + a; }
Var operator-(Var a, double b) { return tape_of(a).push(a.value() - b, {{a, 1.0}}); }
Var operator-(double a, Var b) { return tape_of(b).push(a - b.value(), {{b, -1.0}}); }
Var operator*(Var a, double b) { return tape_of(a).push(a.value() * b, {{a, b}}); }
Var operator*(double a, Var b) { return b * a; }
Var operator/(Var a, double b) {
  if (b == 0.0) throw DomainError("div: division by zero");
  return tape_of(a).push(a.value() / b, {{a, 1.0 / b}});
}

Var exp(Var x) {
  const double y = std::exp(x.value());
  return tape_of(x).push(y, {{x, y}});
}

Var log(Var x) {
  const double v = x.value();
  if (!(v > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v));
  return tape_of(x).push(std::log(v), {{x, 1.0 / v}});
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(Var x) {
  const double y = sigmoid_value(x.value());
  return tape_of(x).push(y, {{x, y * (1.0 - y)}});
}

Var tanh(Var x) {
  const double y = std::tanh(x.value());
  return tape_of(x).push(y, {{x, 1.0 - y * y}});
}

Var square(Var x) {
  const double v = x.value();
  return tape_of(x).push(v * v, {{x, 2.0 * v}});
}

Var floor_at(Var x, double k) {
  Tape& t = tape_of(x);
  const double v = x.value();
  t.note_kink_distance(std::abs(v - k));
  if (v > k) return t.push(v, {{x, 1.0}});
  return t.push(k, {{x, 0.0}});
}

Var stop_gradient(Var x) { return tape_of(x).push(x.value(), std::span<const Edge>{}); }

Var sum(std::span<const Var> xs) {
  Tape& t = tape_of(xs);
  std::vector<Edge> edges;
  edges.reserve(xs.size());
  double s = 0.0;
  for (Var x : xs) {
    s += x.value();
    edges.push_back({x, 1.0});
  }
  return t.push(s, edges);
}

Var mean(std::span<const Var> xs) {
  Tape& t = tape_of(xs);
  const double inv = 1.0 / static_cast<double>(xs.size());
  std::vector<Edge> edges;
  edges.reserve(xs.size());
  double s = 0.0;
  for (Var x : xs) {
    s += x.value();
    edges.push_back({x, inv});
  }
  return t.push(s * inv, edges);
}

Var weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.size() != weights.size()) throw DomainError("weighted_sum: length mismatch");
  Tape& t = tape_of(xs);
  std::vector<Edge> edges;
  edges.reserve(xs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s += weights[i] * xs[i].value();
    edges.push_back({xs[i], weights[i]});
  }
  return t.push(s, edges);
}

Var dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw DomainError("dot: length mismatch");
  Tape& t = tape_of(a);
  std::vector<Edge> edges;
  edges.reserve(2 * a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i].value() * b[i].value();
    edges.push_back({a[i], b[i].value()});
    edges.push_back({b[i], a[i].value()});
  }
  return t.push(s, edges);
}

Var weighted_mean(std::span<const Var> weights, std::span<const double> values) {
  if (weights.size() != values.size()) throw DomainError("weighted_mean: length mismatch");
  Tape& t = tape_of(weights);
  double total = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i].value();
    acc += weights[i].value() * values[i];
  }
  if (total == 0.0) throw DomainError("weighted_mean: weights sum to zero");
  const double m = acc / total;
  std::vector<Edge> edges;
  edges.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) edges.push_back({weights[i], (values[i] - m) / total});
  return t.push(m, edges);
}

Var cosine(std::span<const Var> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("cosine: length mismatch");
  Tape& t = tape_of(a);
  double aa = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa += a[i].value() * a[i].value();
    ab += a[i].value() * b[i];
  }
  const double na = std::sqrt(aa);
  const double nb = norm_value(b);
  if (na == 0.0 || nb == 0.0) return t.push(0.0, std::span<const Edge>{});
  const double f = ab / (na * nb);
  std::vector<Edge> edges;
  edges.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    edges.push_back({a[i], b[i] / (na * nb) - f * a[i].value() / aa});
  }
  return t.push(f, edges);
}

Var cosine(std::span<const Var> a, std::span<const Var> b) {
  if (a.size() != b.size()) throw DomainError("cosine: length mismatch");
  Tape& t = tape_of(a);
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa += a[i].value() * a[i].value();
    bb += b[i].value() * b[i].value();
    ab += a[i].value() * b[i].value();
  }
  const double na = std::sqrt(aa);
  const double nb = std::sqrt(bb);
  if (na == 0.0 || nb == 0.0) return t.push(0.0, std::span<const Edge>{});
  const double f = ab / (na * nb);
  std::vector<Edge> edges;
  edges.reserve(2 * a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    edges.push_back({a[i], b[i].value() / (na * nb) - f * a[i].value() / aa});
    edges.push_back({b[i], a[i].value() / (na * nb) - f * b[i].value() / bb});
  }
  return t.push(f, edges);
}

double cosine_value(std::span<const double> a, std::span<const double> b) {
  double aa = 0.0, bb = 0.0, ab = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    aa += a[i] * a[i];
    bb += b[i] * b[i];
    ab += a[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed() ? "pass" : "FAIL") << " max_rel_error=" << max_rel_error << " failing=[";
  for (std::size_t i = 0; i < failing.size(); ++i) os << (i ? "," : "") << failing[i];
  os << "]";
  return os.str();
}

GradCheckReport grad_check(const ScalarFn& f, std::span<const double> x,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  Tape tape;
  {
    auto vars = tape.variables(x);
    Var root = f(tape, vars);
    tape.backward(root);
    report.value = root.value();
    report.min_kink_distance = tape.min_kink_distance();
    for (Var v : vars) report.analytic.push_back(v.adjoint());
  }
  std::vector<double> probe(x.begin(), x.end());
  auto evaluate = [&]() {
    tape.clear();
    auto vars = tape.variables(probe);
    return f(tape, vars).value();
  };
  const double h = options.step;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = evaluate();
    probe[i] = x[i] - h;
    const double down = evaluate();
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * h);
    report.numeric.push_back(numeric);
    const double a = report.analytic[i];
    const double scale = std::max({std::abs(a), std::abs(numeric), options.scale_floor});
    const double rel = std::abs(a - numeric) / scale;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (!(rel <= options.tolerance)) report.failing.push_back(i);
  }
  return report;
}

}  // namespace etcbound::diff
