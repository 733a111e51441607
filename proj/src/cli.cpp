#include "dks/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dks/errors.hpp"
#include "dks/graph.hpp"
#include "dks/init.hpp"
#include "dks/localmaps.hpp"
#include "dks/netverify.hpp"
#include "dks/pln.hpp"
#include "dks/solver.hpp"

namespace dks::cli {

using nlohmann::json;

double sig9(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// JSON number rounded to 9 significant digits; non-finite values become strings.
json jnum(double v) {
  if (!std::isfinite(v)) return num(v);
  return sig9(v);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ArchArgs {
  std::string arch;
  int D = 0;
  double w = -1.0;
  int width = 0;
  std::string act;

  void add(CLI::App* app, bool required) {
    auto* o = app->add_option("--arch", arch,
                              "architecture JSON file, or a template name: mlp, resnet_v2_modified, "
                              "wide_resnet, skip_free, resnet_v2_layernorm");
    if (required) o->required();
    app->add_option("--D", D, "template depth parameter");
    app->add_option("--w", w, "template residual-branch weight");
    app->add_option("--width", width, "template width (mlp) or width multiplier (wide_resnet)");
  }

  NetworkGraph build() const {
    const std::string a = act.empty() ? "tanh" : act;
    auto need_D = [&] {
      if (D <= 0) throw DomainError("template '" + arch + "' needs --D");
    };
    auto need_w = [&] {
      if (w < 0.0) throw DomainError("template '" + arch + "' needs --w");
    };
    if (arch == "mlp") {
      need_D();
      return mlp(D, a, width > 0 ? width : 64);
    }
    if (arch == "resnet_v2_modified") {
      need_D();
      need_w();
      return resnet_v2_modified(D, w, a);
    }
    if (arch == "wide_resnet") {
      need_D();
      need_w();
      return wide_resnet(D, width > 0 ? width : 1, w, a);
    }
    if (arch == "skip_free") {
      need_D();
      return skip_free(D, a);
    }
    if (arch == "resnet_v2_layernorm") {
      need_D();
      return resnet_v2_layernorm(D, true);
    }
    return load_graph(arch);
  }
};

json residual_audit(const ActivationSpec& s, double psi, double q_slope_target) {
  const MapStats st = map_stats(s);
  json r;
  r["q1"] = jnum(st.q1 - 1.0);
  r["c0"] = jnum(st.c0);
  r["q_slope"] = jnum(st.dq1 - q_slope_target);
  r["c_slope"] = jnum(st.dc1 - psi);
  return r;
}

// psi for a DKS transform: from the maximal slope function of an
// architecture, or psi^depth for a plain chain.
double target_psi(const ArchArgs& a, int depth, double zeta) {
  if (!a.arch.empty()) return maximal_slope(a.build()).invert(zeta);
  if (depth <= 0) throw DomainError("give --arch or a positive --depth");
  return std::pow(zeta, 1.0 / depth);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep kernel shaping: Q/C maps, slope polynomials and activation transforms", "dks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for all subcommands");

  std::function<void()> action;

  // transform
  auto* tr = app.add_subcommand("transform", "solve for DKS activation transform constants");
  struct {
    ArchArgs arch;
    int depth = 0;
    double zeta = 0.0;
    double q_slope = 1.0;
    std::uint64_t seed = 0;
    std::string out;
  } t;
  tr->add_option("--act", t.arch.act, "activation name")->required();
  t.arch.add(tr, false);
  tr->add_option("--depth", t.depth, "depth of a plain chain (mu = psi^depth)");
  tr->add_option("--zeta", t.zeta, "global slope bound (> 1)")->required();
  tr->add_option("--q-slope", t.q_slope, "target Q'(1)");
  tr->add_option("--seed", t.seed, "seed for random restarts");
  tr->add_option("--out", t.out, "output file (default stdout)");
  tr->callback([&] {
    action = [&] {
      const ActivationSpec& base = registry_get(t.arch.act);
      const double psi = target_psi(t.arch, t.depth, t.zeta);
      SolveOptions opts;
      opts.seed = t.seed;
      opts.q_slope_target = t.q_slope;
      const SolveResult r = solve_transform(base, psi, opts);
      json j;
      j["activation"] = base.name;
      j["zeta"] = jnum(t.zeta);
      j["psi"] = jnum(psi);
      j["alpha"] = jnum(r.params.alpha);
      j["beta"] = jnum(r.params.beta);
      j["gamma"] = jnum(r.params.gamma);
      j["delta"] = jnum(r.params.delta);
      j["homogeneous"] = r.homogeneous;
      j["attempts"] = r.history.size();
      j["residuals"] = residual_audit(transform(base, r.params), psi, t.q_slope);
      emit(j.dump(2) + "\n", t.out, out);
    };
  });

  // map-eval
  auto* me = app.add_subcommand("map-eval", "evaluate the C map of a chain of identical layers");
  struct {
    std::string act;
    int depth = 1;
    int grid = 41;
    double q = 1.0;
    TransformParams p;
    double zeta = 0.0;
    std::string out, stats;
  } m;
  me->add_option("--act", m.act, "activation name")->required();
  me->add_option("--depth", m.depth, "number of layers")->check(CLI::PositiveNumber);
  me->add_option("--grid", m.grid, "number of c values on [-1, 1]")->check(CLI::Range(2, 1000000));
  me->add_option("--q", m.q, "input q value")->check(CLI::PositiveNumber);
  me->add_option("--alpha", m.p.alpha, "transform alpha");
  me->add_option("--beta", m.p.beta, "transform beta");
  me->add_option("--gamma", m.p.gamma, "transform gamma");
  me->add_option("--delta", m.p.delta, "transform delta");
  me->add_option("--zeta", m.zeta, "apply the DKS transform for psi = zeta^(1/depth) instead");
  me->add_option("--out", m.out, "CSV output file (default stdout)");
  me->add_option("--stats", m.stats, "JSON statistics file");
  me->callback([&] {
    action = [&] {
      ActivationSpec spec = registry_get(m.act);
      if (m.zeta > 0.0) {
        const double psi = std::pow(m.zeta, 1.0 / m.depth);
        spec = transform(spec, solve_transform(spec, psi).params);
      } else if (m.p.alpha != 1.0 || m.p.beta != 0.0 || m.p.gamma != 1.0 || m.p.delta != 0.0) {
        m.p.validate();
        spec = transform(spec, m.p);
      }
      std::string csv = "c_in,c_out\n";
      double lo = 1.0, hi = -1.0, dev = 0.0, q_out = m.q;
      for (int i = 0; i < m.grid; ++i) {
        const double c = -1.0 + 2.0 * i / (m.grid - 1);
        const auto states = iterate_sequential(spec, m.depth, {m.q, c});
        const double co = states.back().c;
        q_out = states.back().q;
        lo = std::min(lo, co);
        hi = std::max(hi, co);
        dev = std::max(dev, std::abs(co - c));
        csv += num(c) + "," + num(co) + "\n";
      }
      emit(csv, m.out, out);
      if (!m.stats.empty()) {
        json j;
        j["activation"] = spec.name;
        j["depth"] = m.depth;
        j["q_in"] = jnum(m.q);
        j["q_out"] = jnum(q_out);
        j["c_out_min"] = jnum(lo);
        j["c_out_max"] = jnum(hi);
        j["max_deviation"] = jnum(dev);
        emit(j.dump(2) + "\n", m.stats, out);
      }
    };
  });

  // slope
  auto* sl = app.add_subcommand("slope", "maximal slope function of an architecture");
  struct {
    ArchArgs arch;
    double zeta = 0.0;
    bool invert = false;
    double psi = 0.0;
    std::string out;
  } s;
  s.arch.add(sl, true);
  sl->add_option("--act", s.arch.act, "activation name used by templates");
  sl->add_option("--zeta", s.zeta, "global slope bound");
  sl->add_flag("--invert", s.invert, "solve mu(psi) = zeta");
  sl->add_option("--psi", s.psi, "evaluate mu at this psi");
  sl->add_option("--out", s.out, "output file (default stdout)");
  sl->callback([&] {
    action = [&] {
      const MaxSlopeFn mu = maximal_slope(s.arch.build());
      json j;
      j["candidates"] = json::array();
      for (const SlopeExpr& c : mu.candidates()) j["candidates"].push_back(c.to_string());
      if (s.psi > 0.0) {
        j["psi"] = jnum(s.psi);
        j["mu"] = jnum(mu(s.psi));
      }
      if (s.invert) {
        if (s.zeta == 0.0) throw DomainError("--invert needs --zeta");
        const double p = mu.invert(s.zeta);
        j["zeta"] = jnum(s.zeta);
        j["psi_star"] = jnum(p);
        j["mu_at_psi_star"] = jnum(mu(p));
      }
      emit(j.dump(2) + "\n", s.out, out);
    };
  });

  // init
  auto* in = app.add_subcommand("init", "Delta-initialize every affine layer of an architecture");
  struct {
    ArchArgs arch;
    std::string scheme;
    std::uint64_t seed = 0;
    std::string out;
  } ini;
  ini.arch.add(in, true);
  in->add_option("--scheme", ini.scheme, "suo-delta or gauss-delta")
      ->required()
      ->check(CLI::IsMember({"suo-delta", "gauss-delta"}));
  in->add_option("--seed", ini.seed, "random seed");
  in->add_option("--out", ini.out, "tensor container path; the manifest goes to <out>.json")->required();
  in->callback([&] {
    action = [&] {
      const NetworkGraph g = ini.arch.build();
      const DeltaScheme sc = ini.scheme == "suo-delta" ? DeltaScheme::Orthogonal : DeltaScheme::Gaussian;
      const auto tensors = initialize_graph(g, sc, ini.seed);
      write_tensors(ini.out, tensors);
      json man;
      man["format"] = "DKSTENS1";
      man["dtype"] = "f64";
      man["byte_order"] = "little";
      man["scheme"] = ini.scheme;
      man["seed"] = ini.seed;
      man["tensors"] = json::array();
      for (const Tensor& t : tensors) man["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
      const std::string text = man.dump(2) + "\n";
      emit(text, ini.out + ".json", out);
      out << text;
    };
  });

  // pln
  auto* pl = app.add_subcommand("pln", "per-location normalization of a CSV feature map");
  struct {
    std::string in, out;
    double c = 0.0;
    bool has_c = false;
  } p;
  pl->add_option("--in", p.in, "input CSV, channels as rows")->required();
  pl->add_option("--out", p.out, "output CSV (default stdout)");
  auto* copt = pl->add_option("--const", p.c, "use a constant extra channel with this value");
  pl->callback([&] {
    p.has_c = copt->count() > 0;
    action = [&] {
      const FeatureMap x = read_feature_csv(read_file(p.in));
      emit(write_feature_csv(p.has_c ? pln_const(x, p.c) : pln(x)), p.out, out);
    };
  });

  // verify
  auto* ve = app.add_subcommand("verify", "desk-scale checks of the map predictions");
  ve->require_subcommand(1);
  auto* qd = ve->add_subcommand("qdrift", "empirical q values through a DKS MLP");
  struct {
    std::string act = "softplus";
    int depth = 30, width = 512, inputs = 64, psi_depth = 100;
    double zeta = 1.5, q_slope = 1.0, band_lo = 0.95, band_hi = 1.05;
    std::string scheme = "suo";
    std::uint64_t seed = 0;
    std::string out, summary;
  } q;
  qd->add_option("--act", q.act, "activation name");
  qd->add_option("--depth", q.depth, "network depth")->check(CLI::PositiveNumber);
  qd->add_option("--width", q.width, "network width")->check(CLI::Range(1, 2048));
  qd->add_option("--inputs", q.inputs, "number of random inputs")->check(CLI::PositiveNumber);
  qd->add_option("--zeta", q.zeta, "global slope bound");
  qd->add_option("--psi-depth", q.psi_depth, "psi = zeta^(1/psi-depth)")->check(CLI::PositiveNumber);
  qd->add_option("--q-slope", q.q_slope, "target Q'(1) of the transform");
  qd->add_option("--scheme", q.scheme, "suo or gaussian")->check(CLI::IsMember({"suo", "gaussian"}));
  qd->add_option("--band-lo", q.band_lo, "lower bound for per-layer mean q");
  qd->add_option("--band-hi", q.band_hi, "upper bound for per-layer mean q");
  qd->add_option("--seed", q.seed, "random seed");
  qd->add_option("--out", q.out, "CSV output (default stdout)");
  qd->add_option("--summary", q.summary, "JSON summary file (default stderr)");
  qd->callback([&] {
    action = [&] {
      const ActivationSpec& base = registry_get(q.act);
      SolveOptions opts;
      opts.q_slope_target = q.q_slope;
      const double psi = std::pow(q.zeta, 1.0 / q.psi_depth);
      const ActivationSpec spec = transform(base, solve_transform(base, psi, opts).params);
      const DenseNet net = build_dense(q.depth, q.width, spec,
                                       q.scheme == "suo" ? InitScheme::Suo : InitScheme::Gaussian, q.seed);
      const auto stats = empirical_qc(net, random_unit_inputs(q.width, q.inputs, derive_seed(q.seed, 1u << 20)));
      std::string csv = "layer,mean,std\n";
      bool pass = true;
      for (const LayerStats& st : stats) {
        csv += std::to_string(st.layer) + "," + num(st.q_mean) + "," + num(st.q_std) + "\n";
        pass = pass && st.q_mean >= q.band_lo && st.q_mean <= q.band_hi;
      }
      emit(csv, q.out, out);
      json j;
      j["check"] = "qdrift";
      j["activation"] = q.act;
      j["psi"] = jnum(psi);
      j["q_slope_target"] = jnum(q.q_slope);
      j["final_mean_q"] = jnum(stats.back().q_mean);
      j["final_deviation"] = jnum(std::abs(stats.back().q_mean - 1.0));
      j["band"] = {jnum(q.band_lo), jnum(q.band_hi)};
      j["pass"] = pass;
      if (q.summary.empty())
        err << j.dump(2) << "\n";
      else
        emit(j.dump(2) + "\n", q.summary, out);
    };
  });
  auto* nt = ve->add_subcommand("ntk", "analytic per-layer NTK of a DKS MLP");
  struct {
    std::string act = "tanh";
    int depth = 10;
    double zeta = 1.05, c0 = 0.4;
    bool raw = false;
    std::string out, summary;
  } n;
  nt->add_option("--act", n.act, "activation name");
  nt->add_option("--depth", n.depth, "network depth")->check(CLI::PositiveNumber);
  nt->add_option("--zeta", n.zeta, "global slope bound");
  nt->add_option("--c0", n.c0, "input cosine similarity");
  nt->add_flag("--raw", n.raw, "use the untransformed activation");
  nt->add_option("--out", n.out, "CSV output (default stdout)");
  nt->add_option("--summary", n.summary, "JSON summary file (default stderr)");
  nt->callback([&] {
    action = [&] {
      ActivationSpec spec = registry_get(n.act);
      if (!n.raw) spec = transform(spec, solve_transform(spec, std::pow(n.zeta, 1.0 / n.depth)).params);
      const NtkResult r = ntk_per_layer(n.depth, spec, n.c0);
      std::string csv = "layer,theta,theta_product\n";
      double dev = 0.0;
      for (int i = 0; i < n.depth; ++i) {
        csv += std::to_string(i + 1) + "," + num(r.theta[i]) + "," + num(r.theta_product[i]) + "\n";
        dev = std::max(dev, std::abs(r.theta[i] - n.c0));
      }
      emit(csv, n.out, out);
      json j;
      j["check"] = "ntk";
      j["activation"] = spec.name;
      j["c0"] = jnum(n.c0);
      j["q_final"] = jnum(r.q_final);
      j["max_deviation"] = jnum(dev);
      j["cross_check_discrepancy"] = jnum(r.max_discrepancy);
      if (!n.raw) {
        j["bound"] = jnum(11.0 * (n.zeta - 1.0));
        j["pass"] = dev <= 11.0 * (n.zeta - 1.0);
      }
      if (n.summary.empty())
        err << j.dump(2) << "\n";
      else
        emit(j.dump(2) + "\n", n.summary, out);
    };
  });

  // arch-validate
  auto* av = app.add_subcommand("arch-validate", "check an architecture against the graph rules");
  struct {
    ArchArgs arch;
    std::string out;
  } a;
  a.arch.add(av, true);
  av->add_option("--act", a.arch.act, "activation name used by templates");
  av->add_option("--out", a.out, "output file (default stdout)");
  bool invalid = false;
  av->callback([&] {
    action = [&] {
      const NetworkGraph g = a.arch.build();
      const auto vs = validate(g);
      json j;
      j["valid"] = vs.empty();
      j["violations"] = json::array();
      for (const Violation& v : vs) j["violations"].push_back({{"node", v.node}, {"rule", v.rule}, {"message", v.message}});
      j["warnings"] = warnings(g);
      emit(j.dump(2) + "\n", a.out, out);
      invalid = !vs.empty();
    };
  });

  std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 wants reversed order
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }
  try {
    if (action) action();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  if (invalid) {
    err << "error: architecture violates the graph rules\n";
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace dks::cli
