#include "dks/activations.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dks/errors.hpp"

namespace dks {

namespace {

double sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double softplus(double u) {
  return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

std::vector<ActivationSpec> build_registry() {
  std::vector<ActivationSpec> r;
  const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);

  r.push_back({"tanh", [](double u) { return std::tanh(u); },
               [](double u) {
                 const double t = std::tanh(u);
                 return 1.0 - t * t;
               },
               [](double u) {
                 const double t = std::tanh(u);
                 return -2.0 * t * (1.0 - t * t);
               },
               {}, 2, false});
  r.push_back({"erf", [](double u) { return std::erf(u); },
               [=](double u) { return two_over_sqrt_pi * std::exp(-u * u); },
               [=](double u) { return -2.0 * u * two_over_sqrt_pi * std::exp(-u * u); },
               {}, 2, false});
  r.push_back({"relu", [](double u) { return u > 0 ? u : 0.0; },
               [](double u) { return u > 0 ? 1.0 : 0.0; }, {}, {0.0}, 1, true});
  r.push_back({"leaky_relu", [](double u) { return u > 0 ? u : kLeakyReluSlope * u; },
               [](double u) { return u > 0 ? 1.0 : kLeakyReluSlope; }, {}, {0.0}, 1, true});
  r.push_back({"softplus", softplus, sigmoid,
               [](double u) {
                 const double s = sigmoid(u);
                 return s * (1.0 - s);
               },
               {}, 2, false});
  r.push_back({"sigmoid", sigmoid,
               [](double u) {
                 const double s = sigmoid(u);
                 return s * (1.0 - s);
               },
               [](double u) {
                 const double s = sigmoid(u);
                 return s * (1.0 - s) * (1.0 - 2.0 * s);
               },
               {}, 2, false});
  // The derivative jumps at 0 (lambda vs lambda * alpha), so only i = 1 is valid.
  r.push_back({"selu",
               [](double u) {
                 return kSeluLambda * (u > 0 ? u : kSeluAlpha * std::expm1(u));
               },
               [](double u) { return kSeluLambda * (u > 0 ? 1.0 : kSeluAlpha * std::exp(u)); },
               {}, {0.0}, 1, false});
  r.push_back({"swish", [](double u) { return u * sigmoid(u); },
               [](double u) {
                 const double s = sigmoid(u);
                 return s + u * s * (1.0 - s);
               },
               [](double u) {
                 const double s = sigmoid(u);
                 return s * (1.0 - s) * (2.0 + u * (1.0 - 2.0 * s));
               },
               {}, 2, false});
  r.push_back({"elu", [](double u) { return u > 0 ? u : std::expm1(u); },
               [](double u) { return u > 0 ? 1.0 : std::exp(u); },
               [](double u) { return u > 0 ? 0.0 : std::exp(u); }, {0.0}, 2, false});
  r.push_back({"softsign", [](double u) { return u / (1.0 + std::abs(u)); },
               [](double u) {
                 const double d = 1.0 + std::abs(u);
                 return 1.0 / (d * d);
               },
               [](double u) {
                 const double d = 1.0 + std::abs(u);
                 return (u > 0 ? -2.0 : 2.0) / (d * d * d);
               },
               {0.0}, 2, false});
  r.push_back({"bentid", [](double u) { return u + (std::sqrt(u * u + 1.0) - 1.0) / 2.0; },
               [](double u) { return 1.0 + u / (2.0 * std::sqrt(u * u + 1.0)); },
               [](double u) {
                 const double s = u * u + 1.0;
                 return 1.0 / (2.0 * s * std::sqrt(s));
               },
               {}, 2, false});
  r.push_back({"identity", [](double u) { return u; }, [](double) { return 1.0; },
               [](double) { return 0.0; }, {}, 2, true});
  return r;
}

const std::vector<ActivationSpec>& registry() {
  static const std::vector<ActivationSpec> r = build_registry();
  return r;
}

}  // namespace

void TransformParams::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma) ||
      !std::isfinite(delta)) {
    throw DomainError("transform parameters must be finite");
  }
  if (alpha == 0.0) throw DomainError("transform parameter alpha must be non-zero");
  if (!(gamma > 0.0)) throw DomainError("transform parameter gamma must be positive");
}

const ActivationSpec& registry_get(std::string_view name) {
  for (const auto& spec : registry()) {
    if (spec.name == name) return spec;
  }
  std::ostringstream msg;
  msg << "unknown activation '" << name << "'; registered:";
  for (const auto& n : registry_names()) msg << ' ' << n;
  throw UnknownActivationError(msg.str());
}

const std::vector<std::string>& registry_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& spec : registry()) out.push_back(spec.name);
    return out;
  }();
  return names;
}

ActivationSpec transform(const ActivationSpec& spec, const TransformParams& p) {
  p.validate();
  ActivationSpec out;
  std::ostringstream name;
  name.precision(9);
  name << spec.name << "[" << p.alpha << "," << p.beta << "," << p.gamma << "," << p.delta
       << "]";
  out.name = name.str();
  const auto [a, b, g, d] = p;
  out.phi = [phi = spec.phi, a, b, g, d](double u) { return g * (phi(a * u + b) + d); };
  out.dphi = [dphi = spec.dphi, a, b, g](double u) { return a * g * dphi(a * u + b); };
  if (spec.d2phi) {
    out.d2phi = [d2 = spec.d2phi, a, b, g](double u) { return a * a * g * d2(a * u + b); };
  }
  for (double k : spec.kinks) out.kinks.push_back((k - b) / a);
  out.max_deriv_order = spec.max_deriv_order;
  out.homogeneous = false;
  return out;
}

AffineParams equivalent_parameters(const TransformParams& p, const AffineParams& layer,
                                   AbsorbSide side) {
  p.validate();
  if (layer.bias.size() != layer.weights.rows()) {
    std::ostringstream msg;
    msg << "bias has " << layer.bias.size() << " entries but weights have "
        << layer.weights.rows() << " rows";
    throw ShapeError(msg.str());
  }
  AffineParams out;
  if (side == AbsorbSide::Input) {
    out.weights = p.alpha * layer.weights;
    out.bias = p.alpha * layer.bias + Eigen::VectorXd::Constant(layer.bias.size(), p.beta);
  } else {
    out.weights = p.gamma * layer.weights;
    out.bias = p.gamma * p.delta * layer.weights.rowwise().sum() + layer.bias;
  }
  return out;
}

}  // namespace dks
