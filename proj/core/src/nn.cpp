#include "stacca/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace stacca {

using ad::Tape;
using ad::Tensor;

namespace {

ad::Parameter uniform_param(const std::string& name, std::vector<int> shape,
                            int fan_in, RngStream& rng) {
  ad::Parameter p(name, std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& w : p.value) w = rng.next_uniform(-bound, bound);
  return p;
}

}  // namespace

MlpParams make_mlp(const std::string& name, const std::vector<int>& dims,
                   RngStream& rng, bool zero_last) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need >= 2 dims");
  MlpParams mlp;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string tag = name + "/W" + std::to_string(l);
    if (zero_last && l + 2 == dims.size())
      mlp.weights.emplace_back(tag, std::vector<int>{dims[l], dims[l + 1]});
    else
      mlp.weights.push_back(
          uniform_param(tag, {dims[l], dims[l + 1]}, dims[l], rng));
    mlp.biases.emplace_back(name + "/b" + std::to_string(l),
                            std::vector<int>{dims[l + 1]});
  }
  return mlp;
}

Tensor mlp_forward(Tape& tape, MlpParams& mlp, const Tensor& x, Activation act) {
  Tensor h = x;
  for (size_t l = 0; l < mlp.weights.size(); ++l) {
    h = tape.add(tape.matmul(h, tape.watch(mlp.weights[l])),
                 tape.watch(mlp.biases[l]));
    if (l + 1 < mlp.weights.size() && act == Activation::Tanh) h = tape.tanh(h);
  }
  return h;
}

GatLayerParams make_gat_layer(const std::string& name, int in_dim, int head_dim,
                              int num_heads, bool average_merge, RngStream& rng) {
  GatLayerParams layer;
  layer.num_heads = num_heads;
  layer.average_merge = average_merge;
  for (int h = 0; h < num_heads; ++h) {
    const std::string tag = name + "/head" + std::to_string(h);
    layer.weights.push_back(uniform_param(tag + "/W", {in_dim, head_dim}, in_dim, rng));
    layer.attn.push_back(uniform_param(tag + "/a", {2, head_dim}, 2 * head_dim, rng));
  }
  return layer;
}

Tensor gat_mask(Tape& tape, const Graph& graph) {
  const int n = graph.num_nodes;
  std::vector<double> mask(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    mask[static_cast<size_t>(i) * n + i] = 1.0;  // ego attends to itself
    for (int j : graph.adjacency[static_cast<size_t>(i)])
      mask[static_cast<size_t>(i) * n + j] = 1.0;
  }
  return tape.constant({n, n}, std::move(mask));
}

Tensor gat_forward(Tape& tape, GatLayerParams& layer, const Tensor& h,
                   const Tensor& mask, bool final_layer) {
  if (h.rank() != 3) throw std::invalid_argument("gat_forward: expects B x n x d");
  const int batches = h.dim(0), n = h.dim(1), in_dim = h.dim(2);
  const Tensor flat = tape.reshape(h, {batches * n, in_dim});

  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(layer.num_heads));
  for (int head = 0; head < layer.num_heads; ++head) {
    const Tensor w = tape.watch(layer.weights[static_cast<size_t>(head)]);
    const int head_dim = w.shape()[1];
    const Tensor wh = tape.matmul(flat, w);  // (B*n) x head_dim
    const Tensor a = tape.watch(layer.attn[static_cast<size_t>(head)]);
    // a^T [Wh_i || Wh_j] splits into a source score plus a destination score
    const Tensor s_src = tape.reshape(
        tape.matmul(wh, tape.gather_rows(a, {0}), false, true), {batches, n});
    const Tensor s_dst = tape.reshape(
        tape.matmul(wh, tape.gather_rows(a, {1}), false, true), {batches, n});
    const Tensor scores = tape.leaky_relu(tape.pairwise_sum(s_src, s_dst), 0.2);
    const Tensor alpha = tape.softmax_rows(scores, &mask);
    heads.push_back(tape.bmm(alpha, tape.reshape(wh, {batches, n, head_dim})));
  }

  Tensor merged;
  if (layer.average_merge) {
    merged = heads[0];
    for (size_t i = 1; i < heads.size(); ++i) merged = tape.add(merged, heads[i]);
    merged = tape.scale(merged, 1.0 / layer.num_heads);
  } else {
    merged = heads.size() == 1 ? heads[0] : tape.concat(heads, 2);
  }
  return final_layer ? merged : tape.elu(merged);
}

MhsaParams make_mhsa(const std::string& name, int d_model, int num_heads,
                     RngStream& rng) {
  if (d_model % num_heads != 0)
    throw std::invalid_argument("mhsa: d_model must be divisible by num_heads");
  MhsaParams p;
  p.num_heads = num_heads;
  p.d_k = d_model / num_heads;
  for (int h = 0; h < num_heads; ++h) {
    const std::string tag = name + "/head" + std::to_string(h);
    p.wq.push_back(uniform_param(tag + "/Wq", {d_model, p.d_k}, d_model, rng));
    p.wk.push_back(uniform_param(tag + "/Wk", {d_model, p.d_k}, d_model, rng));
    p.wv.push_back(uniform_param(tag + "/Wv", {d_model, p.d_k}, d_model, rng));
  }
  p.wo = uniform_param(name + "/Wo", {d_model, d_model}, d_model, rng);
  return p;
}

Tensor mhsa_forward(Tape& tape, MhsaParams& params, const Tensor& x,
                    const Tensor* mask) {
  if (x.rank() != 3) throw std::invalid_argument("mhsa_forward: expects B x n x d");
  const int batches = x.dim(0), n = x.dim(1), d_model = x.dim(2);
  const Tensor flat = tape.reshape(x, {batches * n, d_model});
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));

  std::vector<Tensor> contexts;
  contexts.reserve(static_cast<size_t>(params.num_heads));
  for (int h = 0; h < params.num_heads; ++h) {
    const Tensor q = tape.reshape(
        tape.matmul(flat, tape.watch(params.wq[static_cast<size_t>(h)])),
        {batches, n, params.d_k});
    const Tensor k = tape.reshape(
        tape.matmul(flat, tape.watch(params.wk[static_cast<size_t>(h)])),
        {batches, n, params.d_k});
    const Tensor v = tape.reshape(
        tape.matmul(flat, tape.watch(params.wv[static_cast<size_t>(h)])),
        {batches, n, params.d_k});
    const Tensor scores = tape.scale(tape.bmm(q, k, false, true), inv_scale);
    const Tensor alpha = tape.softmax_rows(scores, mask);
    contexts.push_back(tape.bmm(alpha, v));
  }
  const Tensor merged =
      contexts.size() == 1 ? contexts[0] : tape.concat(contexts, 2);
  const Tensor out = tape.matmul(tape.reshape(merged, {batches * n, d_model}),
                                 tape.watch(params.wo));
  return tape.reshape(out, {batches, n, d_model});
}

EncoderLayerParams make_encoder_layer(const std::string& name, int d_model,
                                      int num_heads, int d_ff, RngStream& rng) {
  EncoderLayerParams p;
  p.mhsa = make_mhsa(name + "/mhsa", d_model, num_heads, rng);
  p.ffn = make_mlp(name + "/ffn", {d_model, d_ff, d_model}, rng);
  p.norm1_gain = ad::Parameter(name + "/norm1/g", {d_model});
  p.norm1_bias = ad::Parameter(name + "/norm1/b", {d_model});
  p.norm2_gain = ad::Parameter(name + "/norm2/g", {d_model});
  p.norm2_bias = ad::Parameter(name + "/norm2/b", {d_model});
  std::fill(p.norm1_gain.value.begin(), p.norm1_gain.value.end(), 1.0);
  std::fill(p.norm2_gain.value.begin(), p.norm2_gain.value.end(), 1.0);
  return p;
}

namespace {

Tensor layer_norm(Tape& tape, const Tensor& x, ad::Parameter& gain,
                  ad::Parameter& bias) {
  const Tensor standardized = tape.standardize_rows(x, 1e-5);
  return tape.add(tape.mul(standardized, tape.watch(gain)), tape.watch(bias));
}

}  // namespace

Tensor encoder_layer_forward(Tape& tape, EncoderLayerParams& params,
                             const Tensor& x, const Tensor* mask) {
  const int batches = x.dim(0), n = x.dim(1), d_model = x.dim(2);
  const Tensor attended = mhsa_forward(tape, params.mhsa, x, mask);
  const Tensor z = layer_norm(tape, tape.add(x, attended), params.norm1_gain,
                              params.norm1_bias);
  const Tensor ff = tape.reshape(
      mlp_forward(tape, params.ffn, tape.reshape(z, {batches * n, d_model})),
      {batches, n, d_model});
  return layer_norm(tape, tape.add(z, ff), params.norm2_gain, params.norm2_bias);
}

AttnPoolParams make_attn_pool(const std::string& name, int d_model, int hidden,
                              RngStream& rng) {
  AttnPoolParams p;
  // zero-initialized final layer: initial pooling is a plain mean
  p.gate = make_mlp(name, {d_model, hidden, 1}, rng, /*zero_last=*/true);
  return p;
}

Tensor attn_pool(Tape& tape, AttnPoolParams& params, const Tensor& h) {
  if (h.rank() != 3) throw std::invalid_argument("attn_pool: expects B x n x d");
  const int batches = h.dim(0), n = h.dim(1), d = h.dim(2);
  if (n < 1) throw std::invalid_argument("attn_pool: empty input");
  const Tensor scores = tape.reshape(
      mlp_forward(tape, params.gate, tape.reshape(h, {batches * n, d})),
      {batches, n});
  const Tensor weights = tape.reshape(tape.softmax_rows(scores), {batches, 1, n});
  return tape.reshape(tape.bmm(weights, h), {batches, d});
}

void collect_params(MlpParams& p, std::vector<ad::Parameter*>& out) {
  for (size_t l = 0; l < p.weights.size(); ++l) {
    out.push_back(&p.weights[l]);
    out.push_back(&p.biases[l]);
  }
}

void collect_params(GatLayerParams& p, std::vector<ad::Parameter*>& out) {
  for (size_t h = 0; h < p.weights.size(); ++h) {
    out.push_back(&p.weights[h]);
    out.push_back(&p.attn[h]);
  }
}

void collect_params(MhsaParams& p, std::vector<ad::Parameter*>& out) {
  for (size_t h = 0; h < p.wq.size(); ++h) {
    out.push_back(&p.wq[h]);
    out.push_back(&p.wk[h]);
    out.push_back(&p.wv[h]);
  }
  out.push_back(&p.wo);
}

void collect_params(EncoderLayerParams& p, std::vector<ad::Parameter*>& out) {
  collect_params(p.mhsa, out);
  collect_params(p.ffn, out);
  out.push_back(&p.norm1_gain);
  out.push_back(&p.norm1_bias);
  out.push_back(&p.norm2_gain);
  out.push_back(&p.norm2_bias);
}

void collect_params(AttnPoolParams& p, std::vector<ad::Parameter*>& out) {
  collect_params(p.gate, out);
}

}  // namespace stacca
