#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anchorpt/rng.hpp"

namespace anchorpt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EncoderConfig {
  int layers = 2;
  int heads = 4;
  int hidden = 64;
  int ffn_dim = 256;
  int vocab_size = 0;
  int max_len = 512;
  double dropout = 0.0;

  int head_dim() const { return hidden / heads; }
  /// Throws Error when the configuration is inconsistent.
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

struct LayerParameters {
  Matrix query, query_bias;
  Matrix key, key_bias;
  Matrix value, value_bias;
  Matrix output, output_bias;
  Matrix attn_norm_gamma, attn_norm_beta;
  Matrix ffn_in, ffn_in_bias;
  Matrix ffn_out, ffn_out_bias;
  Matrix ffn_norm_gamma, ffn_norm_beta;
};

/// All trainable tensors. Biases and layer-norm vectors are 1 x n matrices.
/// The same type doubles as the gradient container.
struct EncoderParameters {
  Matrix token_embedding;     // vocab x hidden
  Matrix position_embedding;  // max_len x hidden
  Matrix segment_embedding;   // 2 x hidden
  Matrix embed_norm_gamma, embed_norm_beta;
  std::vector<LayerParameters> layers;
  Matrix mlm_weight, mlm_bias;           // hidden x vocab, 1 x vocab
  Matrix cls_hidden, cls_hidden_bias;    // hidden x hidden
  Matrix cls_output, cls_output_bias;    // hidden x 1, 1 x 1

  static EncoderParameters zeros(const EncoderConfig& config);

  /// Visits every tensor with a stable name, in a fixed order.
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  void set_zero();
  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    f("embeddings.token", self.token_embedding);
    f("embeddings.position", self.position_embedding);
    f("embeddings.segment", self.segment_embedding);
    f("embeddings.norm.gamma", self.embed_norm_gamma);
    f("embeddings.norm.beta", self.embed_norm_beta);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      auto& l = self.layers[i];
      const std::string p = "layer" + std::to_string(i) + ".";
      f(p + "attention.query.weight", l.query);
      f(p + "attention.query.bias", l.query_bias);
      f(p + "attention.key.weight", l.key);
      f(p + "attention.key.bias", l.key_bias);
      f(p + "attention.value.weight", l.value);
      f(p + "attention.value.bias", l.value_bias);
      f(p + "attention.output.weight", l.output);
      f(p + "attention.output.bias", l.output_bias);
      f(p + "attention.norm.gamma", l.attn_norm_gamma);
      f(p + "attention.norm.beta", l.attn_norm_beta);
      f(p + "ffn.in.weight", l.ffn_in);
      f(p + "ffn.in.bias", l.ffn_in_bias);
      f(p + "ffn.out.weight", l.ffn_out);
      f(p + "ffn.out.bias", l.ffn_out_bias);
      f(p + "ffn.norm.gamma", l.ffn_norm_gamma);
      f(p + "ffn.norm.beta", l.ffn_norm_beta);
    }
    f("mlm.weight", self.mlm_weight);
    f("mlm.bias", self.mlm_bias);
    f("cls.hidden.weight", self.cls_hidden);
    f("cls.hidden.bias", self.cls_hidden_bias);
    f("cls.output.weight", self.cls_output);
    f("cls.output.bias", self.cls_output_bias);
  }
};

using Gradients = EncoderParameters;

/// Weights ~ N(0, 0.02), layer-norm gammas 1, biases 0 and a zero final
/// score layer. Values are rounded to float32 storage precision.
EncoderParameters init_parameters(const EncoderConfig& config, std::uint64_t seed);

/// Rounds every value to the nearest float32, the precision of checkpoints.
void round_to_storage_precision(EncoderParameters& params);

/// [layer][head] -> seq_len x seq_len row-stochastic matrix.
using AttentionMaps = std::vector<std::vector<Matrix>>;

struct LayerNormCache {
  Matrix normalized;  // x_hat
  Eigen::VectorXd inv_std;
};

struct LayerTrace {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> probs;
  Matrix context;
  Matrix attn_dropout;
  LayerNormCache attn_norm;
  Matrix attn_out;  // output of the first layer norm
  Matrix ffn_pre, ffn_act;
  Matrix ffn_dropout;
  LayerNormCache ffn_norm;
};

/// Everything the backward pass needs from one forward evaluation.
struct ForwardTrace {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  LayerNormCache embed_norm;
  Matrix embed_dropout;
  std::vector<LayerTrace> layers;
  Matrix hidden;
  Matrix cls_activation;  // 1 x hidden, tanh layer of the score head
  double score = 0.0;

  AttentionMaps attention() const;
};

struct Encoding {
  Matrix hidden;
  AttentionMaps attention;
};

/// Upstream gradients arriving at the heads for one sequence.
struct SequenceGradient {
  double d_score = 0.0;
  std::vector<int> mlm_positions;
  Matrix d_mlm_logits;  // |mlm_positions| x vocab
};

class Encoder {
 public:
  Encoder(EncoderConfig config, EncoderParameters params);

  const EncoderConfig& config() const { return config_; }
  const EncoderParameters& params() const { return params_; }
  EncoderParameters& params() { return params_; }

  /// Hidden states and all attention maps. Throws on over-length input or
  /// ids outside the vocabulary.
  Encoding encode(std::span<const int> token_ids, std::span<const int> segment_ids) const;

  /// Unbounded relevance score from the [CLS] state. Requires [CLS] first.
  double cls_score(std::span<const int> token_ids, std::span<const int> segment_ids) const;

  /// One vocab-sized row of logits per masked position.
  Matrix mlm_logits(const Matrix& hidden, std::span<const int> positions) const;

  /// Recorded forward pass. Dropout is applied only when `dropout_rng` is
  /// given and the configured rate is positive.
  ForwardTrace forward(std::span<const int> token_ids, std::span<const int> segment_ids,
                       Rng* dropout_rng = nullptr) const;

  /// Accumulates exact gradients of the loss described by `upstream` into
  /// `grads`.
  void backward(const ForwardTrace& trace, const SequenceGradient& upstream,
                Gradients& grads) const;

 private:
  void check_input(std::span<const int> token_ids, std::span<const int> segment_ids) const;

  EncoderConfig config_;
  EncoderParameters params_;
};

/// Head-averaged attention row of `layer`, averaged again over the query
/// positions. Throws when query_positions is empty or out of range.
std::vector<double> attention_from_position(const AttentionMaps& attention, std::size_t layer,
                                            std::span<const std::size_t> query_positions);

/// Row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

}  // namespace anchorpt
