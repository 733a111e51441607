#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "dks/errors.hpp"
#include "dks/graph.hpp"

namespace dks {

struct SlopeExpr::Impl {
  Kind kind = Kind::Const;
  double value = 1.0;
  std::string node;
  std::vector<SlopeExpr> children;
  std::vector<double> weights;
  std::string key;
  bool has_psi = false;
};

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SlopeExpr::SlopeExpr(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

SlopeExpr SlopeExpr::constant(double v) {
  auto i = std::make_shared<Impl>();
  i->kind = Kind::Const;
  i->value = v;
  i->key = fmt(v);
  return SlopeExpr(i);
}

SlopeExpr SlopeExpr::psi(std::string node) {
  auto i = std::make_shared<Impl>();
  i->kind = Kind::Psi;
  i->node = std::move(node);
  i->key = "psi";
  i->has_psi = true;
  return SlopeExpr(i);
}

SlopeExpr SlopeExpr::product(const std::vector<SlopeExpr>& factors) {
  double coef = 1.0;
  std::vector<SlopeExpr> flat;
  for (const SlopeExpr& f : factors) {
    switch (f.kind()) {
      case Kind::Const:
        coef *= f.value();
        break;
      case Kind::Product:
        coef *= f.value();
        flat.insert(flat.end(), f.children().begin(), f.children().end());
        break;
      default:
        flat.push_back(f);
    }
  }
  if (flat.empty() || coef == 0.0) return constant(coef);
  if (flat.size() == 1 && coef == 1.0) return flat[0];
  std::stable_sort(flat.begin(), flat.end(),
                   [](const SlopeExpr& a, const SlopeExpr& b) { return a.to_string() < b.to_string(); });

  auto i = std::make_shared<Impl>();
  i->kind = Kind::Product;
  i->value = coef;
  i->children = std::move(flat);
  std::string key = coef == 1.0 ? "" : fmt(coef) + "*";
  for (std::size_t a = 0; a < i->children.size();) {
    std::size_t b = a;
    while (b < i->children.size() && i->children[b].to_string() == i->children[a].to_string()) ++b;
    if (a > 0) key += "*";
    key += i->children[a].to_string();
    if (b - a > 1) key += "^" + std::to_string(b - a);
    a = b;
  }
  i->key = std::move(key);
  i->has_psi = true;
  return SlopeExpr(i);
}

SlopeExpr SlopeExpr::weighted_sum(const std::vector<double>& weights,
                                  const std::vector<SlopeExpr>& terms) {
  if (weights.size() != terms.size()) throw DomainError("weighted_sum: weight/term count mismatch");
  // Constant terms are merged into one; zero weights are dropped so that an
  // infinite term with weight 0 cannot produce NaN.
  double const_part = 0.0;
  std::vector<std::pair<double, SlopeExpr>> parts;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (weights[k] == 0.0) continue;
    if (terms[k].kind() == Kind::Const)
      const_part += weights[k] * terms[k].value();
    else
      parts.emplace_back(weights[k], terms[k]);
  }
  if (parts.empty()) return constant(const_part);
  if (const_part != 0.0) parts.emplace_back(const_part, constant(1.0));
  if (parts.size() == 1 && parts[0].first == 1.0) return parts[0].second;
  std::stable_sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) {
    return a.second.to_string() != b.second.to_string() ? a.second.to_string() < b.second.to_string()
                                                        : a.first < b.first;
  });

  auto i = std::make_shared<Impl>();
  i->kind = Kind::WeightedSum;
  std::string key = "(";
  for (std::size_t k = 0; k < parts.size(); ++k) {
    i->weights.push_back(parts[k].first);
    i->children.push_back(parts[k].second);
    if (k > 0) key += " + ";
    key += fmt(parts[k].first) + "*" + parts[k].second.to_string();
  }
  i->key = key + ")";
  i->has_psi = true;
  return SlopeExpr(i);
}

SlopeExpr::Kind SlopeExpr::kind() const { return impl_->kind; }
double SlopeExpr::value() const { return impl_->value; }
const std::vector<SlopeExpr>& SlopeExpr::children() const { return impl_->children; }
const std::vector<double>& SlopeExpr::weights() const { return impl_->weights; }
const std::string& SlopeExpr::node() const { return impl_->node; }
bool SlopeExpr::has_psi() const { return impl_->has_psi; }
std::string SlopeExpr::to_string() const { return impl_->key; }

double SlopeExpr::eval(double psi) const {
  static const std::map<std::string, double> none;
  return eval(none, psi);
}

double SlopeExpr::eval(const std::map<std::string, double>& slopes, double psi) const {
  switch (impl_->kind) {
    case Kind::Const:
      return impl_->value;
    case Kind::Psi: {
      if (!impl_->node.empty()) {
        if (auto it = slopes.find(impl_->node); it != slopes.end()) return it->second;
      }
      return psi;
    }
    case Kind::Product: {
      double v = impl_->value;
      for (const SlopeExpr& c : impl_->children) {
        const double x = c.eval(slopes, psi);
        if (x == 0.0) return 0.0;
        v *= x;
      }
      return v;
    }
    case Kind::WeightedSum: {
      double v = 0.0;
      for (std::size_t k = 0; k < impl_->children.size(); ++k)
        v += impl_->weights[k] * impl_->children[k].eval(slopes, psi);
      return v;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::vector<SlopeExpr> SlopeExpr::factors() const {
  if (impl_->kind == Kind::Const) return {};
  if (impl_->kind == Kind::Product) return impl_->children;
  return {*this};
}

namespace {

// Index-based view of a graph with dominators computed from the input.
struct GraphIndex {
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<int>> children;
  std::vector<int> topo;  // nodes reachable from the input, topologically sorted
  std::vector<int> idom;  // immediate dominator, -1 when unreachable
  int root = -1;
};

GraphIndex index_graph(const NetworkGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  GraphIndex ix;
  ix.parents.resize(n);
  ix.children.resize(n);
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].kind == NodeKind::Input) ix.root = i;
    for (const std::string& p : g.nodes[i].parents) {
      const auto j = g.index_of(p);
      if (!j) throw GraphError("node '" + g.nodes[i].id + "' has unknown parent '" + p + "'");
      ix.parents[i].push_back(static_cast<int>(*j));
      ix.children[*j].push_back(i);
    }
  }
  if (ix.root < 0) throw GraphError("graph has no input node");

  std::vector<int> indeg(n, 0);
  for (int i = 0; i < n; ++i) indeg[i] = static_cast<int>(ix.parents[i].size());
  std::vector<int> ready{ix.root};
  std::vector<char> reach(n, 0);
  reach[ix.root] = 1;
  // Kahn's algorithm over the whole graph; nodes not reachable from the input
  // are dropped afterwards.
  std::vector<int> order;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0 && i != ix.root) ready.push_back(i);
  for (std::size_t k = 0; k < ready.size(); ++k) {
    const int v = ready[k];
    order.push_back(v);
    for (int c : ix.children[v]) {
      if (reach[v]) reach[c] = 1;
      if (--indeg[c] == 0) ready.push_back(c);
    }
  }
  if (static_cast<int>(order.size()) != n) throw GraphError("graph contains a cycle");
  for (int v : order)
    if (reach[v]) ix.topo.push_back(v);

  std::vector<int> pos(n, -1);
  for (int k = 0; k < static_cast<int>(ix.topo.size()); ++k) pos[ix.topo[k]] = k;
  ix.idom.assign(n, -1);
  ix.idom[ix.root] = ix.root;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (pos[a] > pos[b]) a = ix.idom[a];
      while (pos[b] > pos[a]) b = ix.idom[b];
    }
    return a;
  };
  // One pass suffices on a DAG processed in topological order.
  for (int v : ix.topo) {
    if (v == ix.root) continue;
    int d = -1;
    for (int p : ix.parents[v]) {
      if (pos[p] < 0) continue;
      d = d < 0 ? p : intersect(p, d);
    }
    ix.idom[v] = d;
  }
  return ix;
}

// Slope polynomials in series-parallel form: a join node J with fork
// F = idom(J) maps to p(F -> J) * p(F), where p(F -> J) combines the branch
// polynomials, so shared prefixes become common factors.
class SlopeBuilder {
 public:
  SlopeBuilder(const NetworkGraph& g) : g_(g), ix_(index_graph(g)), channels_(channel_counts(g)) {}

  const GraphIndex& index() const { return ix_; }

  SlopeExpr poly(int from, int to) {
    if (to == from) return SlopeExpr::constant(1.0);
    const auto key = std::make_pair(from, to);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    const Node& n = g_.nodes[to];
    if (ix_.idom[to] < 0)
      throw GraphError("node '" + n.id + "' is not reachable from the network input");
    SlopeExpr e = SlopeExpr::constant(1.0);
    switch (n.kind) {
      case NodeKind::Input:
        throw GraphError("node depends on the network input other than through '" +
                         g_.nodes[from].id + "'; not a subnetwork");
      case NodeKind::Affine:
      case NodeKind::LayerNorm:
      case NodeKind::Pool:
        e = poly(from, ix_.parents[to].at(0));
        break;
      case NodeKind::Nonlinear:
        e = SlopeExpr::product({SlopeExpr::psi(n.id), poly(from, ix_.parents[to].at(0))});
        break;
      case NodeKind::Concat:
      case NodeKind::NormSum: {
        const int fork = ix_.idom[to];
        e = SlopeExpr::product({join(to, fork), poly(from, fork)});
        break;
      }
    }
    memo_.emplace(key, e);
    return e;
  }

  // p(F -> J) for a join J whose fork is F.
  SlopeExpr join(int j, int fork) {
    const Node& n = g_.nodes[j];
    std::vector<double> w;
    std::vector<SlopeExpr> t;
    if (n.kind == NodeKind::Concat) {
      double total = 0.0;
      for (const std::string& p : n.parents) total += channels_.at(p);
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        w.push_back(channels_.at(n.parents[k]) / total);
        t.push_back(poly(fork, ix_.parents[j][k]));
      }
    } else {
      if (n.weights.size() != n.parents.size())
        throw GraphError("sum node '" + n.id + "' has mismatched weights");
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        w.push_back(n.weights[k] * n.weights[k]);
        t.push_back(poly(fork, ix_.parents[j][k]));
      }
    }
    return SlopeExpr::weighted_sum(w, t);
  }

 private:
  const NetworkGraph& g_;
  GraphIndex ix_;
  std::map<std::string, int> channels_;
  std::map<std::pair<int, int>, SlopeExpr> memo_;
};

int require_index(const NetworkGraph& g, const std::string& id) {
  const auto i = g.index_of(id);
  if (!i) throw GraphError("unknown node id '" + id + "'");
  return static_cast<int>(*i);
}

}  // namespace

SlopeExpr slope_poly(const NetworkGraph& g, const Subnetwork& sub) {
  SlopeBuilder b(g);
  const int from = sub.from.empty() ? b.index().root : require_index(g, sub.from);
  const int to = require_index(g, sub.to.empty() ? g.output : sub.to);
  return b.poly(from, to);
}

MaxSlopeFn::MaxSlopeFn(std::vector<SlopeExpr> candidates) : candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw DomainError("maximal slope function needs at least one candidate");
}

double MaxSlopeFn::operator()(double psi) const {
  double m = -std::numeric_limits<double>::infinity();
  for (const SlopeExpr& c : candidates_) m = std::max(m, c.eval(psi));
  return m;
}

bool MaxSlopeFn::has_psi() const {
  return std::any_of(candidates_.begin(), candidates_.end(),
                     [](const SlopeExpr& c) { return c.has_psi(); });
}

double MaxSlopeFn::invert(double zeta, double value_tol) const {
  if (!(zeta > 1.0) || !std::isfinite(zeta)) {
    std::ostringstream msg;
    msg << "zeta must be a finite value > 1, got " << zeta;
    throw DomainError(msg.str());
  }
  if (!has_psi()) throw GraphError("maximal slope function is constant (no nonlinear layer); not invertible");

  // Closed form for a single pure power psi^k.
  if (candidates_.size() == 1) {
    const SlopeExpr& c = candidates_[0];
    const auto fs = c.factors();
    const bool pure = (c.kind() == SlopeExpr::Kind::Psi) ||
                      (c.kind() == SlopeExpr::Kind::Product && c.value() == 1.0 &&
                       std::all_of(fs.begin(), fs.end(),
                                   [](const SlopeExpr& f) { return f.kind() == SlopeExpr::Kind::Psi; }));
    if (pure) return std::pow(zeta, 1.0 / static_cast<double>(fs.size()));
  }

  double lo = 1.0, hi = 2.0;
  while ((*this)(hi) < zeta) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw GraphError("maximal slope function does not reach zeta");
  }
  // Bisect until the bracket collapses; the value tolerance is then checked.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((*this)(mid) < zeta)
      lo = mid;
    else
      hi = mid;
  }
  const double psi = std::abs((*this)(lo) - zeta) <= std::abs((*this)(hi) - zeta) ? lo : hi;
  if (!(std::abs((*this)(psi) - zeta) <= value_tol)) {
    std::ostringstream msg;
    msg << "slope inversion did not reach tolerance: |mu(psi) - zeta| = " << std::abs((*this)(psi) - zeta);
    throw GraphError(msg.str());
  }
  return psi;
}

double invert_max_slope(const MaxSlopeFn& m, double zeta) { return m.invert(zeta); }

namespace {

bool factor_subset(const SlopeExpr& small, const SlopeExpr& big) {
  std::multiset<std::string> have;
  for (const SlopeExpr& f : big.factors()) have.insert(f.to_string());
  for (const SlopeExpr& f : small.factors()) {
    auto it = have.find(f.to_string());
    if (it == have.end()) return false;
    have.erase(it);
  }
  return true;
}

}  // namespace

MaxSlopeFn maximal_slope(const NetworkGraph& g) {
  for (const Violation& v : validate(g)) {
    if (v.rule == "duplicate-id" || v.rule == "unknown-parent" || v.rule == "input-count" ||
        v.rule == "cycle" || v.rule == "unreachable-output" || v.rule == "arity" ||
        v.rule == "weight-count") {
      throw GraphError("invalid graph: " + v.message);
    }
  }
  SlopeBuilder b(g);
  const GraphIndex& ix = b.index();
  const int n = static_cast<int>(g.nodes.size());
  const int out = require_index(g, g.output);

  // Nodes that the output depends on.
  std::vector<char> relevant(n, 0);
  std::vector<int> stack{out};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (relevant[v]) continue;
    relevant[v] = 1;
    for (int p : ix.parents[v]) stack.push_back(p);
  }

  std::vector<SlopeExpr> cands{b.poly(ix.root, out)};
  for (int j : ix.topo) {
    const Node& join = g.nodes[j];
    if (!relevant[j] || (join.kind != NodeKind::Concat && join.kind != NodeKind::NormSum)) continue;
    const int fork = ix.idom[j];
    for (int p : ix.parents[j]) {
      // Branch interior: ancestors of p strictly below the fork. Every such
      // node must feed only the branch itself or the join.
      std::vector<char> inside(n, 0);
      stack.clear();
      if (p != fork) stack.push_back(p);
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (inside[v] || v == fork) continue;
        inside[v] = 1;
        for (int q : ix.parents[v]) stack.push_back(q);
      }
      for (int v = 0; v < n; ++v) {
        if (!inside[v]) continue;
        for (int c : ix.children[v]) {
          if (relevant[c] && c != j && !inside[c]) {
            throw GraphError("graph is not series-parallel: node '" + g.nodes[v].id +
                             "' inside a branch of '" + join.id + "' feeds '" + g.nodes[c].id +
                             "' outside it");
          }
        }
      }
      cands.push_back(b.poly(fork, p));
    }
  }

  // Drop constants (they never exceed 1), duplicates and factors of others.
  std::vector<SlopeExpr> uniq;
  std::set<std::string> seen;
  for (const SlopeExpr& c : cands) {
    if (!c.has_psi()) continue;
    if (seen.insert(c.to_string()).second) uniq.push_back(c);
  }
  if (uniq.empty()) return MaxSlopeFn({SlopeExpr::constant(1.0)});
  std::vector<SlopeExpr> kept;
  for (std::size_t a = 0; a < uniq.size(); ++a) {
    bool pruned = false;
    for (std::size_t c = 0; c < uniq.size() && !pruned; ++c)
      if (a != c && factor_subset(uniq[a], uniq[c])) pruned = true;
    if (!pruned) kept.push_back(uniq[a]);
  }
  return MaxSlopeFn(std::move(kept));
}

}  // namespace dks
