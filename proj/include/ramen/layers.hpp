#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ramen/gradcheck.hpp"
#include "ramen/tensor.hpp"

namespace ramen {

enum class Mode { Train, Eval };

/// Draws from U[-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng);

struct Linear {
  Tensor weight;  // dout x din
  Tensor bias;    // dout

  Linear() = default;
  Linear(std::size_t din, std::size_t dout, std::mt19937_64& rng);

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  Tensor forward(const Tensor& x) const;      // (n,din) -> (n,dout)
  Tensor forward_vec(const Tensor& x) const;  // (din,)  -> (dout,)
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct Embedding {
  Tensor table;  // vocab x dim

  Embedding() = default;
  Embedding(std::size_t vocab, std::size_t dim, std::mt19937_64& rng);

  Tensor lookup(const std::vector<int>& ids) const;  // (T,dim)
  void collect_params(const std::string& prefix, ParamList& out) const;
};

/// Gating: z and r are sigmoid gates, the candidate applies the reset gate to
/// the recurrent term, and the new state interpolates candidate and old state.
struct GRUCell {
  Tensor w_update, w_reset, w_cand;  // h x din
  Tensor u_update, u_reset, u_cand;  // h x h
  Tensor b_update, b_reset, b_cand;  // h
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  GRUCell() = default;
  GRUCell(std::size_t din, std::size_t hidden, std::mt19937_64& rng);

  Tensor step(const Tensor& x, const Tensor& h) const;
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct BiGRU {
  GRUCell forward_cell;
  GRUCell backward_cell;

  BiGRU() = default;
  BiGRU(std::size_t din, std::size_t hidden, std::mt19937_64& rng);

  struct Output {
    Tensor outputs;  // T x 2h, row t = [h_fwd(t), h_bwd(t)]
    Tensor final;    // 2h, [h_fwd(T), h_bwd(1)]
  };
  Output forward(const Tensor& seq) const;  // seq: T x din, T >= 1
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct BatchNorm1d {
  Tensor gamma, beta;  // learnable, per feature
  std::vector<double> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  Mode mode = Mode::Train;

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t dim, double eps_ = 1e-5);

  /// eps 0, eval mode, identity affine, (0,1) running stats: exact identity.
  static BatchNorm1d eval_identity(std::size_t dim);

  std::size_t dim() const { return gamma.numel(); }
  Tensor forward(const Tensor& x);  // (n,dim); train mode needs n >= 2
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct MultiHeadAttention {
  std::size_t model_dim = 0;
  std::size_t heads = 0;
  std::vector<Tensor> w_query, w_key, w_value;  // per head, (d/H) x d
  Tensor w_out;                                 // d x d

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d, std::size_t n_heads, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;  // (R,d) -> (R,d), unmasked
  void collect_params(const std::string& prefix, ParamList& out) const;
};

/// Row-wise layer normalization with learnable affine.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

struct TransformerEncoderLayer {
  MultiHeadAttention attention;
  Linear ff_in, ff_out;
  Tensor norm1_gamma, norm1_beta;
  Tensor norm2_gamma, norm2_beta;
  double norm_eps = 1e-5;

  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(std::size_t d, std::size_t n_heads, std::size_t ff_dim,
                          std::mt19937_64& rng);

  // post-norm residuals: norm(x + att(x)), then norm(y + ffn(y))
  Tensor forward(const Tensor& x) const;
  void collect_params(const std::string& prefix, ParamList& out) const;
};

struct MLP {
  std::vector<Linear> layers;

  MLP() = default;
  MLP(const std::vector<std::size_t>& dims, std::mt19937_64& rng);  // dims.size() >= 2

  Tensor forward(Tensor x) const;  // relu between layers, none after the last
  std::size_t out_dim() const { return layers.back().out_dim(); }
  void collect_params(const std::string& prefix, ParamList& out) const;
};

}  // namespace ramen
