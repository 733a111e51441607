#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dks/activations.hpp"
#include "dks/localmaps.hpp"

namespace dks {

enum class NodeKind { Input, Affine, Nonlinear, Concat, NormSum, LayerNorm, Pool };
enum class PoolKind { Max, WeightedMean, Mean };

struct Node {
  std::string id;
  NodeKind kind = NodeKind::Affine;
  std::vector<std::string> parents;

  int channels = 0;      // Input channel count
  int in_channels = 0;   // Affine; 0 means "take it from the parent"
  int out_channels = 0;  // Affine
  int filter_h = 1;
  int filter_w = 1;
  int stride = 1;
  std::string activation;       // Nonlinear
  std::vector<double> weights;  // NormSum, one per parent
  PoolKind pool = PoolKind::Max;
};

/// DAG of layers with a single Input node and a designated output.
struct NetworkGraph {
  std::vector<Node> nodes;
  std::string output;

  const Node& node(const std::string& id) const;
  std::optional<std::size_t> index_of(const std::string& id) const;
};

/// Appends nodes with generated ids ("n0", "n1", ...) and returns the id.
class GraphBuilder {
 public:
  std::string input(int channels);
  std::string affine(const std::string& parent, int out_channels, int filter_h = 1,
                     int filter_w = 1, int stride = 1);
  std::string nonlinear(const std::string& parent, const std::string& activation);
  std::string concat(const std::vector<std::string>& parents);
  std::string norm_sum(const std::vector<std::string>& parents, const std::vector<double>& weights);
  std::string layer_norm(const std::string& parent);
  std::string pool(const std::string& parent, PoolKind kind);

  NetworkGraph finish(const std::string& output) &&;

 private:
  std::string push(Node n);
  NetworkGraph g_;
};

/// Activation name -> spec. Names missing from the table fall back to the
/// registry of base activations.
using ActivationTable = std::map<std::string, ActivationSpec>;

struct Violation {
  std::string node;  // empty for graph-level violations
  std::string rule;
  std::string message;
};

/// All invariant violations of the graph; empty iff it is well formed.
/// Rules: duplicate-id, unknown-parent, arity, input-count, cycle,
/// unreachable-output, combined-layer, unnormalized-sum, weight-count,
/// even-filter, channel-mismatch.
std::vector<Violation> validate(const NetworkGraph& g);

/// Non-fatal notes, e.g. plain mean pooling which only has a heuristic map.
std::vector<std::string> warnings(const NetworkGraph& g);

/// Output channel count of every node.
std::map<std::string, int> channel_counts(const NetworkGraph& g);

struct Propagation {
  std::map<std::string, QCState> states;
  std::map<std::string, double> means;  // average unit value per node
  std::vector<std::string> warnings;
};

/// Extended Q/C map propagation through the graph. Sums with arbitrary
/// weights are accepted (the general weighted-sum rules are used) so that
/// non-normalized architectures can be analysed; every other violation from
/// validate() raises GraphError.
Propagation qc_propagate(const NetworkGraph& g, const ActivationTable& specs, QCState input);

/// Expression tree for slope polynomials p(psi).
///
/// Products are kept flat with constants folded into a coefficient, so the
/// factor list doubles as a structural factorisation for pruning.
class SlopeExpr {
 public:
  enum class Kind { Const, Psi, Product, WeightedSum };

  static SlopeExpr constant(double v);
  /// A nonlinear layer's slope; `node` identifies the layer for per-layer evaluation.
  static SlopeExpr psi(std::string node = {});
  static SlopeExpr product(const std::vector<SlopeExpr>& factors);
  static SlopeExpr weighted_sum(const std::vector<double>& weights,
                                const std::vector<SlopeExpr>& terms);

  Kind kind() const;
  double value() const;  // Const: value; Product: coefficient
  const std::vector<SlopeExpr>& children() const;
  const std::vector<double>& weights() const;
  const std::string& node() const;

  /// Evaluates with a common slope psi. Overflow saturates to +inf.
  double eval(double psi) const;
  /// Evaluates with per-layer slopes; layers missing from the map use `psi`.
  double eval(const std::map<std::string, double>& slopes, double psi = 1.0) const;

  bool has_psi() const;
  /// Canonical text form; equal strings mean structurally equal expressions
  /// under a common psi.
  std::string to_string() const;
  /// Non-constant factors of the canonical product form (a single-element
  /// list for non-products).
  std::vector<SlopeExpr> factors() const;

 private:
  struct Impl;
  explicit SlopeExpr(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

/// Selects the subnetwork from the output of `from` to the output of `to`.
/// Empty ids mean the graph's Input and output.
struct Subnetwork {
  std::string from;
  std::string to;
};

/// Slope polynomial of a subnetwork, built with the recipe: nonlinear -> psi,
/// affine / layer norm / pool / input -> 1, composition -> product,
/// concatenation -> channel-weighted average, normalized sum -> sum of w_i^2 p_i.
SlopeExpr slope_poly(const NetworkGraph& g, const Subnetwork& sub = {});

/// Pointwise maximum of candidate slope polynomials.
class MaxSlopeFn {
 public:
  explicit MaxSlopeFn(std::vector<SlopeExpr> candidates);

  const std::vector<SlopeExpr>& candidates() const { return candidates_; }
  double operator()(double psi) const;
  bool has_psi() const;

  /// psi* > 1 with mu(psi*) = zeta. Pure powers psi^k use the closed form
  /// zeta^(1/k); otherwise bisection on [1, 2] with doubling of the upper end.
  /// Throws DomainError for zeta <= 1 and GraphError when mu has no psi term.
  double invert(double zeta, double value_tol = 1e-6) const;

 private:
  std::vector<SlopeExpr> candidates_;
};

/// Maximal slope function: the whole-network polynomial plus the polynomial
/// of every parallel-branch interior, dropping candidates that are factors of
/// another. Throws GraphError for graphs that are not series-parallel.
MaxSlopeFn maximal_slope(const NetworkGraph& g);

double invert_max_slope(const MaxSlopeFn& m, double zeta);

// Architecture templates.

/// Input -> depth x (affine -> nonlinear) -> affine.
NetworkGraph mlp(int depth, const std::string& activation = "tanh", int width = 64);

/// Modified ResNet-V2 (no normalization layers) with depth parameter D and
/// residual-branch weight w; the shortcut gets sqrt(1 - w^2).
NetworkGraph resnet_v2_modified(int depth, double w, const std::string& activation = "softplus");

/// Same layer sequence as resnet_v2_modified with all shortcuts removed.
NetworkGraph skip_free(int depth, const std::string& activation = "softplus");

/// Wide-ResNet with depth D (D - 4 divisible by 6) and width multiplier.
NetworkGraph wide_resnet(int depth, int width, double w, const std::string& activation = "softplus");

/// ResNet-V2 with layer norm in place of batch norm. With `normalized_sums`
/// false the blocks use plain sums (weights 1, 1); with true, residual weight
/// 1/sqrt(q + 1) where q is the block's input q in the plain-sum network.
NetworkGraph resnet_v2_layernorm(int depth, bool normalized_sums,
                                 const std::string& activation = "relu_sqrt2");

/// Residual stage sizes (number of blocks per stage) for a ResNet-V2 depth.
/// 50, 101 and 152 use the standard layouts; other D with (D - 2) / 3 >= 4
/// blocks use (1, 1, n - 3, 1).
std::vector<int> resnet_stage_blocks(int depth);

/// Chain of `depth` combined layers with a skip connection from the network
/// input to the chain output (weights 1/sqrt(2) each), optionally followed by
/// one more nonlinear layer.
NetworkGraph skip_chain(int depth, bool trailing_nonlinear, const std::string& activation = "tanh");

/// Table entry for "relu_sqrt2", the sqrt(2)-scaled RELU used by
/// resnet_v2_layernorm (Q(1) = 1).
ActivationTable layernorm_resnet_activations();

// JSON architecture files.
NetworkGraph graph_from_json(const std::string& text);
NetworkGraph load_graph(const std::string& path);
std::string graph_to_json(const NetworkGraph& g);

std::string to_string(NodeKind k);
std::string to_string(PoolKind k);

}  // namespace dks
