#pragma once

#include <string>
#include <vector>

#include "stacca/graph.hpp"
#include "stacca/rng.hpp"
#include "stacca/tensor.hpp"

namespace stacca {

// Graph-aware building blocks on top of the autodiff tape. All forwards take
// batched rank-3 inputs (B x n x d) where every batch entry shares one graph;
// B = 1 recovers the single-instance case.

enum class Activation { Tanh, Identity };

struct MlpParams {
  std::vector<ad::Parameter> weights;  // layer l: (in_l x out_l)
  std::vector<ad::Parameter> biases;   // layer l: (out_l)
};

/// Fan-in-scaled uniform weights, zero biases; zero_last zero-initializes the
/// final layer weights (used for the pooling gate).
MlpParams make_mlp(const std::string& name, const std::vector<int>& dims,
                   RngStream& rng, bool zero_last = false);

/// Affine-activation stack; the final layer stays affine. x is rank-2
/// (rows x in_dim).
ad::Tensor mlp_forward(ad::Tape& tape, MlpParams& mlp, const ad::Tensor& x,
                       Activation hidden_act = Activation::Tanh);

struct GatLayerParams {
  int num_heads = 1;
  bool average_merge = false;          // concat on hidden layers, average on the last
  std::vector<ad::Parameter> weights;  // per head: (in_dim x head_dim)
  std::vector<ad::Parameter> attn;     // per head: (2 x head_dim), rows [a_src; a_dst]
};

GatLayerParams make_gat_layer(const std::string& name, int in_dim, int head_dim,
                              int num_heads, bool average_merge, RngStream& rng);

/// Closed-neighborhood attention mask (adjacency plus self-loops) as an n x n
/// constant 0/1 tensor.
ad::Tensor gat_mask(ad::Tape& tape, const Graph& graph);

/// One GAT layer on H (B x n x in_dim). Scores use LeakyReLU(0.2), attention
/// is restricted to the closed 1-hop neighborhood, heads merge per params,
/// and an ELU nonlinearity applies unless this is the final layer of a stack.
ad::Tensor gat_forward(ad::Tape& tape, GatLayerParams& layer, const ad::Tensor& h,
                       const ad::Tensor& mask, bool final_layer);

struct MhsaParams {
  int num_heads = 1;
  int d_k = 0;
  std::vector<ad::Parameter> wq, wk, wv;  // per head: (d_model x d_k)
  ad::Parameter wo;                       // (d_model x d_model)
};

MhsaParams make_mhsa(const std::string& name, int d_model, int num_heads,
                     RngStream& rng);

/// Scaled dot-product self-attention over tokens, batched. mask (optional)
/// is an n x n 0/1 constant shared across the batch.
ad::Tensor mhsa_forward(ad::Tape& tape, MhsaParams& params, const ad::Tensor& x,
                        const ad::Tensor* mask = nullptr);

struct EncoderLayerParams {
  MhsaParams mhsa;
  MlpParams ffn;  // d_model -> d_ff -> d_model
  ad::Parameter norm1_gain, norm1_bias, norm2_gain, norm2_bias;
};

EncoderLayerParams make_encoder_layer(const std::string& name, int d_model,
                                      int num_heads, int d_ff, RngStream& rng);

/// Post-norm residual arrangement:
/// X' = norm2(Z + FFN(Z)), Z = norm1(X + MHSA(X)), eps = 1e-5.
ad::Tensor encoder_layer_forward(ad::Tape& tape, EncoderLayerParams& params,
                                 const ad::Tensor& x,
                                 const ad::Tensor* mask = nullptr);

struct AttnPoolParams {
  MlpParams gate;  // d_model -> hidden -> 1, final layer zero-initialized
};

AttnPoolParams make_attn_pool(const std::string& name, int d_model, int hidden,
                              RngStream& rng);

/// Softmax-gated weighted average over nodes: (B x n x d) -> (B x d).
ad::Tensor attn_pool(ad::Tape& tape, AttnPoolParams& params, const ad::Tensor& h);

/// Enumeration hook for checkpointing/optimizers.
void collect_params(MlpParams& p, std::vector<ad::Parameter*>& out);
void collect_params(GatLayerParams& p, std::vector<ad::Parameter*>& out);
void collect_params(MhsaParams& p, std::vector<ad::Parameter*>& out);
void collect_params(EncoderLayerParams& p, std::vector<ad::Parameter*>& out);
void collect_params(AttnPoolParams& p, std::vector<ad::Parameter*>& out);

}  // namespace stacca
