#include "dks/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "dks/errors.hpp"

namespace dks {

namespace {

constexpr double kSumWeightTol = 1e-12;

std::size_t expected_parents(NodeKind k) {
  switch (k) {
    case NodeKind::Input:
      return 0;
    case NodeKind::Affine:
    case NodeKind::Nonlinear:
    case NodeKind::LayerNorm:
    case NodeKind::Pool:
      return 1;
    default:
      return 2;  // minimum for Concat / NormSum
  }
}

bool is_join(NodeKind k) { return k == NodeKind::Concat || k == NodeKind::NormSum; }

// Structural violations that make propagation meaningless.
bool is_structural(const std::string& rule) {
  return rule != "unnormalized-sum" && rule != "even-filter" && rule != "channel-mismatch";
}

}  // namespace

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Input:
      return "input";
    case NodeKind::Affine:
      return "affine";
    case NodeKind::Nonlinear:
      return "nonlinear";
    case NodeKind::Concat:
      return "concat";
    case NodeKind::NormSum:
      return "norm_sum";
    case NodeKind::LayerNorm:
      return "layer_norm";
    case NodeKind::Pool:
      return "pool";
  }
  return "?";
}

std::string to_string(PoolKind k) {
  switch (k) {
    case PoolKind::Max:
      return "max";
    case PoolKind::WeightedMean:
      return "weighted_mean";
    case PoolKind::Mean:
      return "mean";
  }
  return "?";
}

const Node& NetworkGraph::node(const std::string& id) const {
  auto i = index_of(id);
  if (!i) throw GraphError("unknown node id '" + id + "'");
  return nodes[*i];
}

std::optional<std::size_t> NetworkGraph::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

std::string GraphBuilder::push(Node n) {
  n.id = "n" + std::to_string(g_.nodes.size());
  g_.nodes.push_back(std::move(n));
  return g_.nodes.back().id;
}

std::string GraphBuilder::input(int channels) {
  Node n;
  n.kind = NodeKind::Input;
  n.channels = channels;
  return push(std::move(n));
}

std::string GraphBuilder::affine(const std::string& parent, int out_channels, int filter_h,
                                 int filter_w, int stride) {
  Node n;
  n.kind = NodeKind::Affine;
  n.parents = {parent};
  n.out_channels = out_channels;
  n.filter_h = filter_h;
  n.filter_w = filter_w;
  n.stride = stride;
  return push(std::move(n));
}

std::string GraphBuilder::nonlinear(const std::string& parent, const std::string& activation) {
  Node n;
  n.kind = NodeKind::Nonlinear;
  n.parents = {parent};
  n.activation = activation;
  return push(std::move(n));
}

std::string GraphBuilder::concat(const std::vector<std::string>& parents) {
  Node n;
  n.kind = NodeKind::Concat;
  n.parents = parents;
  return push(std::move(n));
}

std::string GraphBuilder::norm_sum(const std::vector<std::string>& parents,
                                   const std::vector<double>& weights) {
  Node n;
  n.kind = NodeKind::NormSum;
  n.parents = parents;
  n.weights = weights;
  return push(std::move(n));
}

std::string GraphBuilder::layer_norm(const std::string& parent) {
  Node n;
  n.kind = NodeKind::LayerNorm;
  n.parents = {parent};
  return push(std::move(n));
}

std::string GraphBuilder::pool(const std::string& parent, PoolKind kind) {
  Node n;
  n.kind = NodeKind::Pool;
  n.parents = {parent};
  n.pool = kind;
  return push(std::move(n));
}

NetworkGraph GraphBuilder::finish(const std::string& output) && {
  g_.output = output;
  return std::move(g_);
}

std::vector<Violation> validate(const NetworkGraph& g) {
  std::vector<Violation> out;
  auto add = [&](const std::string& node, const std::string& rule, const std::string& msg) {
    out.push_back({node, rule, msg});
  };

  std::set<std::string> seen;
  for (const Node& n : g.nodes) {
    if (!seen.insert(n.id).second) add(n.id, "duplicate-id", "node id '" + n.id + "' is used twice");
  }

  int inputs = 0;
  bool parents_ok = true;
  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::Input) ++inputs;
    const std::size_t want = expected_parents(n.kind);
    const bool bad_arity = is_join(n.kind) ? n.parents.size() < want : n.parents.size() != want;
    if (bad_arity) {
      std::ostringstream msg;
      msg << to_string(n.kind) << " node expects " << (is_join(n.kind) ? "at least " : "") << want
          << " parent(s), got " << n.parents.size();
      add(n.id, "arity", msg.str());
    }
    for (const std::string& p : n.parents) {
      if (!g.index_of(p)) {
        add(n.id, "unknown-parent", "parent '" + p + "' does not exist");
        parents_ok = false;
      }
    }
  }
  if (inputs != 1) add("", "input-count", "graph must have exactly one input node, found " + std::to_string(inputs));

  // Cycle detection (iterative DFS colouring).
  bool acyclic = true;
  if (parents_ok) {
    std::vector<int> colour(g.nodes.size(), 0);
    std::function<bool(std::size_t)> visit = [&](std::size_t i) {
      colour[i] = 1;
      for (const std::string& p : g.nodes[i].parents) {
        const std::size_t j = *g.index_of(p);
        if (colour[j] == 1) return false;
        if (colour[j] == 0 && !visit(j)) return false;
      }
      colour[i] = 2;
      return true;
    };
    for (std::size_t i = 0; i < g.nodes.size() && acyclic; ++i) {
      if (colour[i] == 0 && !visit(i)) {
        acyclic = false;
        add(g.nodes[i].id, "cycle", "graph contains a cycle through node '" + g.nodes[i].id + "'");
      }
    }
  }

  const auto out_idx = g.index_of(g.output);
  if (!out_idx) {
    add("", "unreachable-output", "output id '" + g.output + "' does not exist");
  } else if (parents_ok && acyclic) {
    // The output must depend on the input.
    std::vector<char> mark(g.nodes.size(), 0);
    std::vector<std::size_t> stack{*out_idx};
    bool reaches = false;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      if (mark[i]) continue;
      mark[i] = 1;
      if (g.nodes[i].kind == NodeKind::Input) reaches = true;
      for (const std::string& p : g.nodes[i].parents) stack.push_back(*g.index_of(p));
    }
    if (!reaches) add(g.output, "unreachable-output", "output is not reachable from the input");
  }

  std::map<std::string, int> channels;
  if (parents_ok && acyclic) channels = channel_counts(g);

  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::Nonlinear && parents_ok && n.parents.size() == 1) {
      const NodeKind pk = g.node(n.parents[0]).kind;
      if (pk != NodeKind::Affine && pk != NodeKind::NormSum && pk != NodeKind::Pool &&
          pk != NodeKind::LayerNorm) {
        add(n.id, "combined-layer",
            "nonlinear layer must directly follow an affine, normalized-sum, pool or layer-norm "
            "node, not " + to_string(pk));
      }
    }
    if (n.kind == NodeKind::NormSum) {
      if (n.weights.size() != n.parents.size()) {
        add(n.id, "weight-count", "sum has " + std::to_string(n.weights.size()) + " weights for " +
                                      std::to_string(n.parents.size()) + " parents");
      } else {
        double s = 0.0;
        for (double w : n.weights) s += w * w;
        if (std::abs(s - 1.0) > kSumWeightTol) {
          std::ostringstream msg;
          msg.precision(12);
          msg << "squared sum weights total " << s << ", not 1";
          add(n.id, "unnormalized-sum", msg.str());
        }
      }
      if (!channels.empty()) {
        for (const std::string& p : n.parents) {
          if (channels[p] != channels[n.parents[0]]) {
            add(n.id, "channel-mismatch", "summed inputs have " + std::to_string(channels[n.parents[0]]) +
                                              " and " + std::to_string(channels[p]) + " channels");
            break;
          }
        }
      }
    }
    if (n.kind == NodeKind::Affine) {
      if (n.filter_h % 2 == 0 || n.filter_w % 2 == 0 || n.filter_h < 1 || n.filter_w < 1) {
        add(n.id, "even-filter", "Delta initialization needs odd positive filter sizes, got " +
                                     std::to_string(n.filter_h) + "x" + std::to_string(n.filter_w));
      }
      if (n.out_channels < 1) add(n.id, "channel-mismatch", "affine layer needs out_channels >= 1");
      if (n.in_channels != 0 && parents_ok && acyclic && n.parents.size() == 1 &&
          channels[n.parents[0]] != n.in_channels) {
        add(n.id, "channel-mismatch", "in_channels " + std::to_string(n.in_channels) +
                                          " differs from parent's " +
                                          std::to_string(channels[n.parents[0]]));
      }
    }
    if (n.kind == NodeKind::Input && n.channels < 1)
      add(n.id, "channel-mismatch", "input needs channels >= 1");
  }
  return out;
}

std::vector<std::string> warnings(const NetworkGraph& g) {
  std::vector<std::string> out;
  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::Pool && n.pool == PoolKind::Mean) {
      out.push_back("node '" + n.id +
                    "': plain mean pooling has no exact C map; identity map used as a heuristic");
    }
  }
  return out;
}

std::map<std::string, int> channel_counts(const NetworkGraph& g) {
  std::map<std::string, int> ch;
  std::function<int(const Node&)> get = [&](const Node& n) -> int {
    if (auto it = ch.find(n.id); it != ch.end()) return it->second;
    int c = 0;
    switch (n.kind) {
      case NodeKind::Input:
        c = n.channels;
        break;
      case NodeKind::Affine:
        c = n.out_channels;
        break;
      case NodeKind::Concat:
        for (const std::string& p : n.parents) c += get(g.node(p));
        break;
      default:
        c = n.parents.empty() ? 0 : get(g.node(n.parents[0]));
    }
    ch[n.id] = c;
    return c;
  };
  for (const Node& n : g.nodes) get(n);
  return ch;
}

Propagation qc_propagate(const NetworkGraph& g, const ActivationTable& specs, QCState input) {
  for (const Violation& v : validate(g)) {
    if (is_structural(v.rule)) {
      throw GraphError("invalid graph" + (v.node.empty() ? "" : " at node '" + v.node + "'") +
                       ": " + v.message);
    }
  }
  if (!(input.q > 0.0) || !(std::abs(input.c) <= 1.0))
    throw DomainError("input state needs q > 0 and |c| <= 1");

  const auto channels = channel_counts(g);
  Propagation out;
  out.warnings = warnings(g);

  auto spec_for = [&](const std::string& name) -> const ActivationSpec& {
    if (auto it = specs.find(name); it != specs.end()) return it->second;
    return registry_get(name);
  };

  std::function<void(const Node&)> eval = [&](const Node& n) {
    if (out.states.count(n.id)) return;
    for (const std::string& p : n.parents) eval(g.node(p));
    QCState s;
    double mean = 0.0;
    switch (n.kind) {
      case NodeKind::Input:
        s = input;
        break;
      case NodeKind::Affine:
        // Zero-mean weights: the maps are identities and unit averages vanish.
        s = out.states[n.parents[0]];
        break;
      case NodeKind::Nonlinear: {
        const ActivationSpec& spec = spec_for(n.activation);
        const QCState in = out.states[n.parents[0]];
        s.q = local_q(spec, in.q);
        s.c = std::clamp(local_c(spec, in.c, in.q, in.q), -1.0, 1.0);
        mean = avg_unit(spec, in.q);
        break;
      }
      case NodeKind::Concat: {
        double kq = 0.0, k = 0.0, kqc = 0.0, km = 0.0;
        for (const std::string& p : n.parents) {
          const double ki = channels.at(p);
          const QCState& ps = out.states[p];
          k += ki;
          kq += ki * ps.q;
          kqc += ki * ps.q * ps.c;
          km += ki * out.means[p];
        }
        s.q = kq / k;
        s.c = kqc / kq;
        mean = km / k;
        break;
      }
      case NodeKind::NormSum: {
        double q = 0.0, qc = 0.0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const double w2 = n.weights[i] * n.weights[i];
          const QCState& ps = out.states[n.parents[i]];
          q += w2 * ps.q;
          qc += w2 * ps.q * ps.c;
          mean += n.weights[i] * out.means[n.parents[i]];
        }
        s.q = q;
        s.c = q > 0.0 ? qc / q : 1.0;
        break;
      }
      case NodeKind::LayerNorm: {
        // Centering and rescaling each location vector; in the wide limit the
        // sample mean is the average unit value m, so c -> (q c - m^2) / (q - m^2).
        const QCState in = out.states[n.parents[0]];
        const double m2 = out.means[n.parents[0]] * out.means[n.parents[0]];
        if (!(in.q - m2 > 0.0)) throw DegenerateActivationError("layer norm input has zero variance");
        s.q = 1.0;
        s.c = std::clamp((in.q * in.c - m2) / (in.q - m2), -1.0, 1.0);
        mean = 0.0;
        break;
      }
      case NodeKind::Pool:
        s = out.states[n.parents[0]];
        mean = out.means[n.parents[0]];
        break;
    }
    out.states[n.id] = s;
    out.means[n.id] = mean;
  };
  eval(g.node(g.output));
  return out;
}

}  // namespace dks
