#include <algorithm>
#include <cmath>
#include <numbers>

#include "dks/errors.hpp"
#include "dks/graph.hpp"

namespace dks {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw DomainError(msg);
}

struct ResnetOptions {
  bool shortcuts = true;
  bool layer_norm = false;
  bool normalized_sums = true;  // only used with layer_norm
  double w = 0.0;
};

// ResNet-V2 bottleneck layout shared by the modified, skip-free and
// layer-norm variants.
NetworkGraph build_resnet(int depth, const std::string& act, const ResnetOptions& o) {
  const auto stages = resnet_stage_blocks(depth);
  GraphBuilder b;
  auto nl = [&](const std::string& p) {
    return b.nonlinear(o.layer_norm ? b.layer_norm(p) : p, act);
  };
  const double ws = o.w;
  const double wsc = std::sqrt(std::max(0.0, 1.0 - o.w * o.w));

  std::string h = b.pool(b.affine(b.input(3), 64, 7, 7, 2), PoolKind::Max);
  double q = 1.0;  // block-input q of the plain-sum layer-norm network
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const int mid = 64 << s;
    const int out = 4 * mid;
    const int stride = s == 0 ? 1 : 2;
    for (int blk = 0; blk < stages[s]; ++blk) {
      const bool transition = blk == 0;
      const std::string entry = transition ? nl(h) : h;
      std::string r = transition ? entry : nl(entry);
      r = b.affine(r, mid, 1, 1);
      r = b.affine(nl(r), mid, 3, 3, transition ? stride : 1);
      r = b.affine(nl(r), out, 1, 1);
      if (!o.shortcuts) {
        h = r;
        continue;
      }
      const std::string sc = transition ? b.affine(entry, out, 1, 1, stride) : h;
      if (o.layer_norm) {
        if (!o.normalized_sums) {
          h = b.norm_sum({r, sc}, {1.0, 1.0});
        } else if (transition) {
          h = b.norm_sum({r, sc}, {std::sqrt(0.5), std::sqrt(0.5)});
        } else {
          h = b.norm_sum({r, sc}, {1.0 / std::sqrt(q + 1.0), std::sqrt(q / (q + 1.0))});
        }
        q = transition ? 2.0 : q + 1.0;
      } else {
        h = b.norm_sum({r, sc}, {ws, wsc});
      }
    }
  }
  h = b.pool(nl(h), PoolKind::WeightedMean);
  return std::move(b).finish(b.affine(h, 1000));
}

}  // namespace

std::vector<int> resnet_stage_blocks(int depth) {
  require(depth >= 14 && (depth - 2) % 3 == 0,
          "ResNet depth D must satisfy D >= 14 and (D - 2) divisible by 3, got " + std::to_string(depth));
  if (depth == 50) return {3, 4, 6, 3};
  if (depth == 101) return {3, 4, 23, 3};
  if (depth == 152) return {3, 8, 36, 3};
  const int n = (depth - 2) / 3;
  return {1, 1, n - 3, 1};
}

NetworkGraph mlp(int depth, const std::string& activation, int width) {
  require(depth >= 0, "mlp depth must be non-negative");
  require(width >= 1, "mlp width must be positive");
  GraphBuilder b;
  std::string h = b.input(width);
  for (int i = 0; i < depth; ++i) h = b.nonlinear(b.affine(h, width), activation);
  return std::move(b).finish(b.affine(h, width));
}

NetworkGraph resnet_v2_modified(int depth, double w, const std::string& activation) {
  require(w >= 0.0 && w <= 1.0, "residual weight w must lie in [0, 1]");
  ResnetOptions o;
  o.w = w;
  return build_resnet(depth, activation, o);
}

NetworkGraph skip_free(int depth, const std::string& activation) {
  ResnetOptions o;
  o.shortcuts = false;
  return build_resnet(depth, activation, o);
}

NetworkGraph resnet_v2_layernorm(int depth, bool normalized_sums, const std::string& activation) {
  ResnetOptions o;
  o.layer_norm = true;
  o.normalized_sums = normalized_sums;
  return build_resnet(depth, activation, o);
}

NetworkGraph wide_resnet(int depth, int width, double w, const std::string& activation) {
  require(depth >= 10 && (depth - 4) % 6 == 0,
          "Wide-ResNet depth D must satisfy D >= 10 and (D - 4) divisible by 6, got " +
              std::to_string(depth));
  require(width >= 1, "Wide-ResNet width multiplier must be positive");
  require(w >= 0.0 && w <= 1.0, "residual weight w must lie in [0, 1]");
  const int per_stage = (depth - 4) / 6;
  const double wsc = std::sqrt(1.0 - w * w);
  GraphBuilder b;
  std::string h = b.affine(b.input(3), 16, 3, 3);
  for (int s = 0; s < 3; ++s) {
    const int ch = (16 << s) * width;
    const int stride = s == 0 ? 1 : 2;
    for (int blk = 0; blk < per_stage; ++blk) {
      const bool transition = blk == 0;
      const std::string entry = b.nonlinear(h, activation);
      std::string r = b.affine(entry, ch, 3, 3, transition ? stride : 1);
      r = b.affine(b.nonlinear(r, activation), ch, 3, 3);
      const std::string sc = transition ? b.affine(entry, ch, 1, 1, stride) : h;
      h = b.norm_sum({r, sc}, {w, wsc});
    }
  }
  h = b.pool(b.nonlinear(h, activation), PoolKind::WeightedMean);
  return std::move(b).finish(b.affine(h, 10));
}

NetworkGraph skip_chain(int depth, bool trailing_nonlinear, const std::string& activation) {
  require(depth >= 1, "skip_chain depth must be positive");
  GraphBuilder b;
  const std::string x = b.input(16);
  std::string h = x;
  for (int i = 0; i < depth; ++i) h = b.nonlinear(b.affine(h, 16), activation);
  h = b.affine(h, 16);
  std::string out = b.norm_sum({h, x}, {std::sqrt(0.5), std::sqrt(0.5)});
  if (trailing_nonlinear) out = b.nonlinear(out, activation);
  return std::move(b).finish(out);
}

ActivationTable layernorm_resnet_activations() {
  TransformParams p;
  p.gamma = std::numbers::sqrt2;
  return {{"relu_sqrt2", transform(registry_get("relu"), p)}};
}

}  // namespace dks
