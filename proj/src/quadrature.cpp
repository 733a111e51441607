#include "dks/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>

#include "dks/errors.hpp"

namespace dks {

namespace {

QuadRule build_rule(int order) {
  if (order < 1) throw DomainError("quadrature order must be positive");
  const int n = order;
  std::vector<double> x(n), w(n);
  const int half = (n + 1) / 2;
  // Three-term recurrence coefficients P_k = a_k z P_{k-1} - b_k P_{k-2}.
  std::vector<double> a(n + 1), b(n + 1);
  for (int k = 2; k <= n; ++k) {
    a[k] = (2.0 * k - 1.0) / k;
    b[k] = (k - 1.0) / k;
  }
  // Evaluates P_n and P_n' at a batch of points; independent recurrences are
  // interleaved so the loop pipelines well for large n.
  constexpr int kBatch = 8;
  auto legendre = [&](const double* z, double* p, double* dp, int m) {
    double p0[kBatch], p1[kBatch];
    for (int j = 0; j < m; ++j) {
      p0[j] = 1.0;
      p1[j] = z[j];
    }
    for (int k = 2; k <= n; ++k) {
      for (int j = 0; j < m; ++j) {
        const double pk = a[k] * z[j] * p1[j] - b[k] * p0[j];
        p0[j] = p1[j];
        p1[j] = pk;
      }
    }
    for (int j = 0; j < m; ++j) {
      if (n == 1) p0[j] = 1.0;
      p[j] = p1[j];
      dp[j] = n * (z[j] * p1[j] - p0[j]) / (z[j] * z[j] - 1.0);
    }
  };
  for (int i0 = 0; i0 < half; i0 += kBatch) {
    const int m = std::min(kBatch, half - i0);
    double z[kBatch], p[kBatch], dp[kBatch];
    // Tricomi initial guesses for the largest roots.
    for (int j = 0; j < m; ++j) z[j] = std::cos(std::numbers::pi * (i0 + j + 0.75) / (n + 0.5));
    for (int it = 0; it < 20; ++it) {
      legendre(z, p, dp, m);
      double worst = 0.0;
      for (int j = 0; j < m; ++j) {
        const double dz = p[j] / dp[j];
        z[j] -= dz;
        worst = std::max(worst, std::abs(dz));
      }
      if (worst <= 1e-15) break;
    }
    legendre(z, p, dp, m);
    for (int j = 0; j < m; ++j) {
      const int i = i0 + j;
      const double wi = 2.0 / ((1.0 - z[j] * z[j]) * dp[j] * dp[j]);
      x[n - 1 - i] = z[j];
      x[i] = -z[j];
      w[n - 1 - i] = wi;
      w[i] = wi;
    }
  }
  if (n % 2 == 1) x[n / 2] = 0.0;

  QuadRule rule;
  rule.order = n;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = kTruncation * x[i];
    rule.weights[i] = kTruncation * w[i];
  }
  return rule;
}

int order_from_env() {
  const char* env = std::getenv("KS_QUAD_ORDER");
  if (env == nullptr || *env == '\0') return kDefaultOrder;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 2 || v > 1000000) {
    throw DomainError(std::string("KS_QUAD_ORDER must be an integer in [2, 1e6], got '") +
                      env + "'");
  }
  return static_cast<int>(v);
}

// Neumaier-compensated accumulator.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

std::vector<double> segment_points(std::span<const double> breakpoints) {
  std::vector<double> pts;
  pts.reserve(breakpoints.size() + 2);
  pts.push_back(-kTruncation);
  for (double b : breakpoints) {
    if (std::isfinite(b) && b > -kTruncation && b < kTruncation) pts.push_back(b);
  }
  pts.push_back(kTruncation);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

template <class F>
double integrate(const F& h, const QuadRule& rule, std::span<const double> breakpoints) {
  const std::vector<double> pts = segment_points(breakpoints);
  const double span = 2.0 * kTruncation;
  Accumulator acc;
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double a = pts[s];
    const double len = pts[s + 1] - a;
    if (len <= 0.0) continue;
    const double scale = len / span;
    for (int i = 0; i < rule.order; ++i) {
      const double t = a + (rule.nodes[i] + kTruncation) * scale;
      const double v = h(t);
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "non-finite integrand value " << v << " at quadrature node x=" << t;
        throw QuadratureError(msg.str(), t);
      }
      acc.add(rule.weights[i] * scale * normal_pdf(t) * v);
    }
  }
  return acc.value();
}

}  // namespace

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

const QuadRule& gauss_legendre_rule(int order) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<const QuadRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, std::make_unique<const QuadRule>(build_rule(order))).first;
  }
  return *it->second;
}

const QuadRule& default_rule() {
  static const QuadRule& rule = gauss_legendre_rule(order_from_env());
  return rule;
}

const QuadRule& default_rule_2d() {
  static const QuadRule& rule = gauss_legendre_rule(kDefaultOrder2d);
  return rule;
}

double gauss_expect(const ScalarFn& h, const QuadRule& rule,
                    std::span<const double> breakpoints) {
  return integrate(h, rule, breakpoints);
}

double gauss_expect_2d(const Integrand& f, const Integrand& g, double c, double q1,
                       double q2, const QuadRule& rule) {
  if (!(std::abs(c) <= 1.0)) {
    std::ostringstream msg;
    msg << "correlation c must lie in [-1, 1], got " << c;
    throw DomainError(msg.str());
  }
  if (!(q1 > 0.0) || !(q2 > 0.0)) throw DomainError("q values must be positive");
  const double s1 = std::sqrt(q1);
  const double s2 = std::sqrt(q2);

  std::vector<double> outer_breaks;
  for (double k : f.kinks) outer_breaks.push_back(k / s1);

  if (1.0 - std::abs(c) <= kDegenerateCorrelation) {
    const double sign = c > 0 ? 1.0 : -1.0;
    for (double k : g.kinks) outer_breaks.push_back(sign * k / s2);
    auto h = [&](double x) { return f.fn(s1 * x) * g.fn(sign * s2 * x); };
    const QuadRule& r1 = rule.order >= default_rule().order ? rule : default_rule();
    return integrate(h, r1, outer_breaks);
  }

  const double sc = std::sqrt(1.0 - c * c);
  const double b = s2 * sc;
  std::vector<double> inner_breaks(g.kinks.size());
  auto outer = [&](double x) {
    const double fx = f.fn(s1 * x);
    if (fx == 0.0) return 0.0;
    const double a = s2 * c * x;
    for (std::size_t i = 0; i < g.kinks.size(); ++i) inner_breaks[i] = (g.kinks[i] - a) / b;
    auto inner = [&](double y) { return g.fn(a + b * y); };
    return fx * integrate(inner, rule, inner_breaks);
  };
  return integrate(outer, rule, outer_breaks);
}

}  // namespace dks
