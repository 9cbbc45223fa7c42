#include "oracle/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace oracle {
namespace {

using namea::nn::ArchSpec;
using namea::nn::Family;
using namea::nn::Network;

using Weights = std::map<std::string, std::vector<double>, std::less<>>;

Weights read_weights(const Network& net) {
  Weights w;
  for (const auto* p : net.params()) w[p->name] = std::vector<double>(p->value.values().begin(), p->value.values().end());
  return w;
}

const std::vector<double>& at(const Weights& w, const std::string& name) {
  auto it = w.find(name);
  if (it == w.end()) throw std::runtime_error("reference: missing parameter " + name);
  return it->second;
}

struct Map3 {
  std::vector<int> v;  // [C,H,W]
  std::size_t c = 0, h = 0, w = 0;
  int operator()(std::size_t ch, std::size_t y, std::size_t x) const { return v[(ch * h + y) * w + x]; }
};

Map3 conv(Tape& t, const Map3& in, const std::vector<double>& wt, const std::vector<double>& bias, std::size_t out_c,
          std::size_t k, std::size_t stride, std::size_t pad) {
  Map3 out;
  out.c = out_c;
  out.h = (in.h + 2 * pad - k) / stride + 1;
  out.w = (in.w + 2 * pad - k) / stride + 1;
  for (std::size_t o = 0; o < out_c; ++o) {
    for (std::size_t y = 0; y < out.h; ++y) {
      for (std::size_t x = 0; x < out.w; ++x) {
        std::vector<int> xs;
        std::vector<double> cs;
        for (std::size_t i = 0; i < in.c; ++i) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long sy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
              const long sx = static_cast<long>(x * stride + kx) - static_cast<long>(pad);
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(in.h) || sx >= static_cast<long>(in.w)) continue;
              xs.push_back(in(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)));
              cs.push_back(wt[((o * in.c + i) * k + ky) * k + kx]);
            }
          }
        }
        out.v.push_back(t.lincomb(xs, cs, bias[o]));
      }
    }
  }
  return out;
}

Map3 relu(Tape& t, Map3 m) {
  for (int& v : m.v) v = t.relu(v);
  return m;
}

Map3 conv_block(Tape& t, const Weights& w, const std::string& site, const Map3& x, std::size_t out_c,
                std::size_t stride, bool residual) {
  const Map3 z1 = conv(t, x, at(w, site + ".conv1.weight"), at(w, site + ".conv1.bias"), out_c, 3, stride, 1);
  if (!residual) return relu(t, z1);
  const Map3 a1 = relu(t, z1);
  Map3 z = conv(t, a1, at(w, site + ".conv2.weight"), at(w, site + ".conv2.bias"), out_c, 3, 1, 1);
  const bool projection = stride != 1 || x.c != out_c;
  const Map3 s = projection ? conv(t, x, at(w, site + ".shortcut.weight"), at(w, site + ".shortcut.bias"), out_c, 1, stride, 0) : x;
  for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] = t.add(z.v[i], s.v[i]);
  return relu(t, z);
}

/// y = x W^T + b on one row.
std::vector<int> linear(Tape& t, const std::vector<int>& x, const std::vector<double>& wt, const std::vector<double>& b,
                        std::size_t out) {
  std::vector<int> y;
  const std::size_t in = x.size();
  for (std::size_t o = 0; o < out; ++o) {
    y.push_back(t.lincomb(x, std::vector<double>(wt.begin() + static_cast<long>(o * in), wt.begin() + static_cast<long>((o + 1) * in)), b[o]));
  }
  return y;
}

std::vector<int> layernorm(Tape& t, const std::vector<int>& x, const std::vector<double>& g, const std::vector<double>& b) {
  const double d = static_cast<double>(x.size());
  const int mean = t.lincomb(x, std::vector<double>(x.size(), 1.0 / d));
  std::vector<int> centered, squares;
  for (int v : x) {
    centered.push_back(t.sub(v, mean));
    squares.push_back(t.mul(centered.back(), centered.back()));
  }
  const int var = t.lincomb(squares, std::vector<double>(x.size(), 1.0 / d), static_cast<double>(1e-5f));
  const int rs = t.rsqrt(var);
  std::vector<int> y;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back(t.shift(t.scale(t.mul(centered[i], rs), g[i]), b[i]));
  return y;
}

int gelu(Tape& t, int x) {
  const double c = std::sqrt(2.0 / 3.14159265358979323846);
  const int cube = t.mul(t.mul(x, x), x);
  const int inner = t.lincomb({x, cube}, {c, c * 0.044715});
  return t.mul(t.scale(x, 0.5), t.shift(t.tanh(inner), 1.0));
}

using Tokens = std::vector<std::vector<int>>;  // [T][D]

Tokens transformer_block(Tape& t, const Weights& w, const ArchSpec& a, const std::string& site, const Tokens& x,
                         std::vector<int>* norm1_out, const std::optional<GsoSpec>& gso, bool hooked) {
  const std::size_t tokens = x.size(), dim = a.dim, heads = a.heads, dh = dim / heads;
  Tokens h1;
  for (const auto& row : x) h1.push_back(layernorm(t, row, at(w, site + ".norm1.weight"), at(w, site + ".norm1.bias")));
  if (hooked && gso) {
    std::vector<int> flat;
    for (const auto& row : h1) flat.insert(flat.end(), row.begin(), row.end());
    flat = t.hook_group(flat, [tokens, dim](std::vector<double>& g) {
      std::vector<double> mags(dim, 0.0);
      for (std::size_t tk = 0; tk < tokens; ++tk)
        for (std::size_t c = 0; c < dim; ++c) mags[c] += std::fabs(g[tk * dim + c]) / static_cast<double>(tokens);
      double mean = 0.0;
      for (double m : mags) mean += m / static_cast<double>(dim);
      double var = 0.0;
      for (double m : mags) var += (m - mean) * (m - mean) / static_cast<double>(dim);
      const double sd = std::sqrt(var);
      if (sd < 1e-12) return;
      for (std::size_t c = 0; c < dim; ++c) {
        if (mags[c] >= mean) continue;
        const double f = std::tanh(std::fabs(mags[c] - mean) / sd);
        for (std::size_t tk = 0; tk < tokens; ++tk) g[tk * dim + c] *= f;
      }
    });
    for (std::size_t tk = 0; tk < tokens; ++tk)
      for (std::size_t c = 0; c < dim; ++c) h1[tk][c] = flat[tk * dim + c];
  }
  if (norm1_out != nullptr) {
    norm1_out->clear();
    for (const auto& row : h1) norm1_out->insert(norm1_out->end(), row.begin(), row.end());
  }

  Tokens qkv;
  for (const auto& row : h1) qkv.push_back(linear(t, row, at(w, site + ".attn.qkv.weight"), at(w, site + ".attn.qkv.bias"), 3 * dim));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tokens attn(tokens, std::vector<int>(dim));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < tokens; ++i) {
      std::vector<int> e;
      for (std::size_t j = 0; j < tokens; ++j) {
        std::vector<int> prods;
        for (std::size_t d = 0; d < dh; ++d) prods.push_back(t.mul(qkv[i][h * dh + d], qkv[j][dim + h * dh + d]));
        e.push_back(t.exp(t.scale(t.sum(prods), scale)));
      }
      const int inv = t.recip(t.sum(e));
      std::vector<int> p;
      for (int v : e) p.push_back(t.mul(v, inv));
      for (std::size_t d = 0; d < dh; ++d) {
        std::vector<int> terms;
        for (std::size_t j = 0; j < tokens; ++j) terms.push_back(t.mul(p[j], qkv[j][2 * dim + h * dh + d]));
        attn[i][h * dh + d] = t.sum(terms);
      }
    }
  }
  Tokens x1;
  for (std::size_t i = 0; i < tokens; ++i) {
    auto r = linear(t, attn[i], at(w, site + ".attn.proj.weight"), at(w, site + ".attn.proj.bias"), dim);
    for (std::size_t d = 0; d < dim; ++d) r[d] = t.add(r[d], x[i][d]);
    x1.push_back(r);
  }
  Tokens y;
  for (std::size_t i = 0; i < tokens; ++i) {
    const auto h2 = layernorm(t, x1[i], at(w, site + ".norm2.weight"), at(w, site + ".norm2.bias"));
    auto pre = linear(t, h2, at(w, site + ".mlp.fc1.weight"), at(w, site + ".mlp.fc1.bias"), a.mlp_hidden);
    for (int& v : pre) v = gelu(t, v);
    auto r = linear(t, pre, at(w, site + ".mlp.fc2.weight"), at(w, site + ".mlp.fc2.bias"), dim);
    for (std::size_t d = 0; d < dim; ++d) r[d] = t.add(r[d], x1[i][d]);
    y.push_back(r);
  }
  return y;
}

}  // namespace

Pass forward(const Network& net, std::span<const double> image, const std::optional<GsoSpec>& gso) {
  const ArchSpec& a = net.arch();
  const Weights w = read_weights(net);
  Pass pass;
  Tape& t = pass.tape;
  Map3 x{{}, a.in_channels, a.image_size, a.image_size};
  if (image.size() != a.in_channels * a.image_size * a.image_size) throw std::runtime_error("reference: image size");
  for (double v : image) x.v.push_back(t.constant(v));
  pass.input = x.v;

  if (a.family == Family::CNN) {
    const std::size_t count = a.blocks.size();
    const std::size_t lo = (count + 2) / 3, hi = (2 * count) / 3;
    for (std::size_t l = 1; l <= count; ++l) {
      const auto& b = a.blocks[l - 1];
      x = conv_block(t, w, "block" + std::to_string(l), x, b.channels, b.stride, b.residual);
      if (gso && l >= lo && l <= hi) {
        const double factor = gso->lambda1 + gso->lambda2 * static_cast<double>(count) / static_cast<double>(l);
        x.v = t.hook_group(x.v, [factor](std::vector<double>& g) {
          for (double& v : g) v *= factor;
        });
      }
    }
    pass.tap = x.v;
    pass.tap_c = x.c;
    pass.tap_h = x.h;
    pass.tap_w = x.w;
    std::vector<int> pooled;
    const std::size_t hw = x.h * x.w;
    for (std::size_t c = 0; c < x.c; ++c) {
      pooled.push_back(t.lincomb(std::vector<int>(x.v.begin() + static_cast<long>(c * hw), x.v.begin() + static_cast<long>((c + 1) * hw)),
                                 std::vector<double>(hw, 1.0 / static_cast<double>(hw))));
    }
    pass.logits = linear(t, pooled, at(w, "fc.weight"), at(w, "fc.bias"), a.num_classes);
    return pass;
  }

  if (a.stem_channels > 0) x = conv_block(t, w, "stem", x, a.stem_channels, 1, false);
  const std::size_t grid = a.image_size / a.patch, cells = grid * grid, dim = a.dim;
  const Map3 maps = conv(t, x, at(w, "embed.proj.weight"), at(w, "embed.proj.bias"), dim, a.patch, a.patch, 0);
  const auto& cls = at(w, "embed.cls_token");
  const auto& pos = at(w, "embed.pos_embed");
  Tokens tokens(1 + cells, std::vector<int>(dim));
  for (std::size_t d = 0; d < dim; ++d) tokens[0][d] = t.constant(cls[d] + pos[d]);
  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t d = 0; d < dim; ++d) tokens[1 + c][d] = t.shift(maps.v[d * cells + c], pos[(1 + c) * dim + d]);

  std::vector<int> norm1;
  for (std::size_t l = 1; l <= a.depth; ++l) {
    const bool last = l == a.depth;
    tokens = transformer_block(t, w, a, "block" + std::to_string(l), tokens, last ? &norm1 : nullptr, gso, last);
  }
  pass.tap_c = dim;
  pass.tap_h = pass.tap_w = grid;
  pass.tap.resize(dim * cells);
  for (std::size_t c = 0; c < cells; ++c)
    for (std::size_t d = 0; d < dim; ++d) pass.tap[d * cells + c] = norm1[(1 + c) * dim + d];

  std::vector<int> pooled;
  if (a.mean_pool) {
    for (std::size_t d = 0; d < dim; ++d) {
      std::vector<int> col;
      for (const auto& row : tokens) col.push_back(row[d]);
      pooled.push_back(t.lincomb(col, std::vector<double>(col.size(), 1.0 / static_cast<double>(col.size()))));
    }
  } else {
    pooled = tokens[0];
  }
  const auto h = layernorm(t, pooled, at(w, "head.norm.weight"), at(w, "head.norm.bias"));
  pass.logits = linear(t, h, at(w, "head.fc.weight"), at(w, "head.fc.bias"), a.num_classes);
  return pass;
}

std::vector<double> logits(const Network& net, std::span<const double> image) {
  const Pass p = forward(net, image);
  std::vector<double> z;
  for (int v : p.logits) z.push_back(p.tape.value(v));
  return z;
}

std::vector<double> input_gradient(const Network& net, std::span<const double> image, int label,
                                   const std::optional<GsoSpec>& gso) {
  Pass p = forward(net, image, gso);
  Tape& t = p.tape;
  std::vector<int> e;
  for (int v : p.logits) e.push_back(t.exp(v));
  const int loss = t.sub(t.log(t.sum(e)), p.logits[static_cast<std::size_t>(label)]);
  const auto g = t.gradient(loss);
  std::vector<double> out;
  for (int v : p.input) out.push_back(g[static_cast<std::size_t>(v)]);
  return out;
}

Features features(const Network& net, std::span<const double> image, int label) {
  const Pass p = forward(net, image);
  const auto g = p.tape.gradient(p.logits[static_cast<std::size_t>(label)]);
  Features f;
  f.c = p.tap_c;
  f.h = p.tap_h;
  f.w = p.tap_w;
  for (int v : p.tap) {
    f.values.push_back(p.tape.value(v));
    f.grads.push_back(g[static_cast<std::size_t>(v)]);
  }
  return f;
}

std::vector<double> gradcam(const Network& net, std::span<const double> image, int label) {
  const Features f = features(net, image, label);
  const std::size_t hw = f.h * f.w;
  std::vector<double> raw(hw, 0.0);
  for (std::size_t c = 0; c < f.c; ++c) {
    double alpha = 0.0;
    for (std::size_t i = 0; i < hw; ++i) alpha += f.grads[c * hw + i];
    alpha /= static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) raw[i] += alpha * f.values[c * hw + i];
  }
  for (double& v : raw) v = std::max(v, 0.0);

  const std::size_t out = net.arch().image_size;
  auto sample = [](double o, std::size_t in, std::size_t n_out, std::size_t& i0, std::size_t& i1, double& frac) {
    double s = (o + 0.5) * static_cast<double>(in) / static_cast<double>(n_out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, in - 1);
    frac = s - static_cast<double>(i0);
  };
  std::vector<double> up(out * out);
  for (std::size_t y = 0; y < out; ++y) {
    std::size_t y0, y1;
    double fy;
    sample(static_cast<double>(y), f.h, out, y0, y1, fy);
    for (std::size_t x = 0; x < out; ++x) {
      std::size_t x0, x1;
      double fx;
      sample(static_cast<double>(x), f.w, out, x0, x1, fx);
      const double top = (1 - fx) * raw[y0 * f.w + x0] + fx * raw[y0 * f.w + x1];
      const double bot = (1 - fx) * raw[y1 * f.w + x0] + fx * raw[y1 * f.w + x1];
      up[y * out + x] = (1 - fy) * top + fy * bot;
    }
  }
  const auto [lo, hi] = std::minmax_element(up.begin(), up.end());
  const double mn = *lo, range = *hi - *lo;
  for (double& v : up) v = range > 0.0 ? (v - mn) / range : 0.0;
  return up;
}

}  // namespace oracle
