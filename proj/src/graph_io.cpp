#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dks/errors.hpp"
#include "dks/graph.hpp"

namespace dks {

namespace {

using nlohmann::json;

NodeKind kind_from(const std::string& s) {
  if (s == "input") return NodeKind::Input;
  if (s == "affine") return NodeKind::Affine;
  if (s == "nonlinear") return NodeKind::Nonlinear;
  if (s == "concat") return NodeKind::Concat;
  if (s == "norm_sum") return NodeKind::NormSum;
  if (s == "layer_norm") return NodeKind::LayerNorm;
  if (s == "pool") return NodeKind::Pool;
  throw GraphError("unknown node kind '" + s +
                   "' (expected input, affine, nonlinear, concat, norm_sum, layer_norm or pool)");
}

PoolKind pool_from(const std::string& s) {
  if (s == "max") return PoolKind::Max;
  if (s == "weighted_mean") return PoolKind::WeightedMean;
  if (s == "mean") return PoolKind::Mean;
  throw GraphError("unknown pool kind '" + s + "' (expected max, weighted_mean or mean)");
}

const std::set<std::string>& allowed_params(NodeKind k) {
  static const std::set<std::string> none;
  static const std::set<std::string> input{"channels"};
  static const std::set<std::string> affine{"in_channels", "out_channels", "filter_h", "filter_w",
                                            "stride"};
  static const std::set<std::string> nonlinear{"activation"};
  static const std::set<std::string> sum{"weights"};
  static const std::set<std::string> pool{"pool"};
  switch (k) {
    case NodeKind::Input:
      return input;
    case NodeKind::Affine:
      return affine;
    case NodeKind::Nonlinear:
      return nonlinear;
    case NodeKind::NormSum:
      return sum;
    case NodeKind::Pool:
      return pool;
    default:
      return none;
  }
}

Node node_from(const json& j) {
  if (!j.is_object()) throw GraphError("each node must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "kind" && key != "params" && key != "parents")
      throw GraphError("unknown node field '" + key + "'");
  }
  Node n;
  n.id = j.at("id").get<std::string>();
  n.kind = kind_from(j.at("kind").get<std::string>());
  if (j.contains("parents")) n.parents = j.at("parents").get<std::vector<std::string>>();
  const json params = j.value("params", json::object());
  if (!params.is_object()) throw GraphError("node '" + n.id + "': params must be an object");
  for (const auto& [key, _] : params.items()) {
    if (!allowed_params(n.kind).count(key))
      throw GraphError("node '" + n.id + "': unknown parameter '" + key + "' for kind " +
                       to_string(n.kind));
  }
  switch (n.kind) {
    case NodeKind::Input:
      n.channels = params.at("channels").get<int>();
      break;
    case NodeKind::Affine:
      n.out_channels = params.at("out_channels").get<int>();
      n.in_channels = params.value("in_channels", 0);
      n.filter_h = params.value("filter_h", 1);
      n.filter_w = params.value("filter_w", 1);
      n.stride = params.value("stride", 1);
      break;
    case NodeKind::Nonlinear:
      n.activation = params.at("activation").get<std::string>();
      break;
    case NodeKind::NormSum:
      n.weights = params.at("weights").get<std::vector<double>>();
      break;
    case NodeKind::Pool:
      n.pool = pool_from(params.value("pool", std::string("max")));
      break;
    default:
      break;
  }
  return n;
}

}  // namespace

NetworkGraph graph_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GraphError(std::string("architecture JSON does not parse: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw GraphError("architecture JSON must be an object");
    for (const auto& [key, _] : doc.items())
      if (key != "nodes" && key != "output") throw GraphError("unknown top-level field '" + key + "'");
    NetworkGraph g;
    for (const json& j : doc.at("nodes")) g.nodes.push_back(node_from(j));
    g.output = doc.at("output").get<std::string>();
    return g;
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed architecture JSON: ") + e.what());
  }
}

NetworkGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open architecture file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return graph_from_json(ss.str());
}

std::string graph_to_json(const NetworkGraph& g) {
  json nodes = json::array();
  for (const Node& n : g.nodes) {
    json j;
    j["id"] = n.id;
    j["kind"] = to_string(n.kind);
    json params = json::object();
    switch (n.kind) {
      case NodeKind::Input:
        params["channels"] = n.channels;
        break;
      case NodeKind::Affine:
        if (n.in_channels) params["in_channels"] = n.in_channels;
        params["out_channels"] = n.out_channels;
        params["filter_h"] = n.filter_h;
        params["filter_w"] = n.filter_w;
        params["stride"] = n.stride;
        break;
      case NodeKind::Nonlinear:
        params["activation"] = n.activation;
        break;
      case NodeKind::NormSum:
        params["weights"] = n.weights;
        break;
      case NodeKind::Pool:
        params["pool"] = to_string(n.pool);
        break;
      default:
        break;
    }
    if (!params.empty()) j["params"] = params;
    if (!n.parents.empty()) j["parents"] = n.parents;
    nodes.push_back(j);
  }
  json doc;
  doc["nodes"] = nodes;
  doc["output"] = g.output;
  return doc.dump(2);
}

}  // namespace dks
