#include "anchorpt/encoder.hpp"

#include <cmath>
#include <random>

#include "anchorpt/error.hpp"
#include "anchorpt/vocab.hpp"

namespace anchorpt {
namespace {

constexpr double kNormEps = 1e-12;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// Accumulates weight/bias gradients of y = x w + b and returns dL/dx.
Matrix affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw, Matrix& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  return dy * w.transpose();
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const Eigen::ArrayXXd centered = x.row(r).array() - mean;
    const double inv = 1.0 / std::sqrt(centered.square().mean() + kNormEps);
    cache.normalized.row(r) = centered.matrix() * inv;
    cache.inv_std(r) = inv;
  }
  Matrix y = (cache.normalized.array().rowwise() * gamma.row(0).array()).matrix();
  y.rowwise() += beta.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gamma, const LayerNormCache& cache,
                           Matrix& dgamma, Matrix& dbeta) {
  const Matrix& xhat = cache.normalized;
  dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  const Matrix dxhat = (dy.array().rowwise() * gamma.row(0).array()).matrix();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
    dx.row(r) = (cache.inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2)).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

// Inverted dropout mask, or an empty matrix when dropout is inactive.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return {};
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(*rng) < rate ? 0.0 : keep;
  return mask;
}

void apply_mask(Matrix& x, const Matrix& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

Matrix layer_forward(const LayerParameters& p, const EncoderConfig& cfg, const Matrix& x,
                     LayerTrace& lt, Rng* rng) {
  const Eigen::Index n = x.rows();
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  lt.input = x;
  lt.query = affine(x, p.query, p.query_bias);
  lt.key = affine(x, p.key, p.key_bias);
  lt.value = affine(x, p.value, p.value_bias);
  lt.context.resize(n, cfg.hidden);
  lt.probs.resize(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    const auto q = lt.query.middleCols(h * dh, dh);
    const auto k = lt.key.middleCols(h * dh, dh);
    const auto v = lt.value.middleCols(h * dh, dh);
    lt.probs[static_cast<std::size_t>(h)] = softmax_rows((q * k.transpose()) * scale);
    lt.context.middleCols(h * dh, dh).noalias() = lt.probs[static_cast<std::size_t>(h)] * v;
  }
  Matrix attn = affine(lt.context, p.output, p.output_bias);
  lt.attn_dropout = dropout_mask(n, cfg.hidden, cfg.dropout, rng);
  apply_mask(attn, lt.attn_dropout);
  lt.attn_out = layer_norm(x + attn, p.attn_norm_gamma, p.attn_norm_beta, lt.attn_norm);

  lt.ffn_pre = affine(lt.attn_out, p.ffn_in, p.ffn_in_bias);
  lt.ffn_act = lt.ffn_pre.unaryExpr(&gelu);
  Matrix ffn = affine(lt.ffn_act, p.ffn_out, p.ffn_out_bias);
  lt.ffn_dropout = dropout_mask(n, cfg.hidden, cfg.dropout, rng);
  apply_mask(ffn, lt.ffn_dropout);
  return layer_norm(lt.attn_out + ffn, p.ffn_norm_gamma, p.ffn_norm_beta, lt.ffn_norm);
}

Matrix layer_backward(const LayerParameters& p, const EncoderConfig& cfg, const LayerTrace& lt,
                      const Matrix& d_out, LayerParameters& g) {
  const Eigen::Index n = lt.input.rows();
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix d_res2 = layer_norm_backward(d_out, p.ffn_norm_gamma, lt.ffn_norm, g.ffn_norm_gamma,
                                            g.ffn_norm_beta);
  Matrix d_attn_out = d_res2;
  Matrix d_ffn = d_res2;
  apply_mask(d_ffn, lt.ffn_dropout);
  const Matrix d_act = affine_backward(lt.ffn_act, p.ffn_out, d_ffn, g.ffn_out, g.ffn_out_bias);
  const Matrix d_pre = (d_act.array() * lt.ffn_pre.unaryExpr(&gelu_grad).array()).matrix();
  d_attn_out += affine_backward(lt.attn_out, p.ffn_in, d_pre, g.ffn_in, g.ffn_in_bias);

  const Matrix d_res1 = layer_norm_backward(d_attn_out, p.attn_norm_gamma, lt.attn_norm,
                                            g.attn_norm_gamma, g.attn_norm_beta);
  Matrix dx = d_res1;
  Matrix d_attn = d_res1;
  apply_mask(d_attn, lt.attn_dropout);
  const Matrix d_context = affine_backward(lt.context, p.output, d_attn, g.output, g.output_bias);

  Matrix dq(n, cfg.hidden), dk(n, cfg.hidden), dv(n, cfg.hidden);
  for (int h = 0; h < cfg.heads; ++h) {
    const Matrix& probs = lt.probs[static_cast<std::size_t>(h)];
    const auto dc = d_context.middleCols(h * dh, dh);
    const auto q = lt.query.middleCols(h * dh, dh);
    const auto k = lt.key.middleCols(h * dh, dh);
    const auto v = lt.value.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = probs.transpose() * dc;
    const Matrix d_probs = dc * v.transpose();
    const Eigen::VectorXd row_dot = (d_probs.array() * probs.array()).rowwise().sum();
    const Matrix d_scores =
        (probs.array() * (d_probs.array().colwise() - row_dot.array())).matrix() * scale;
    dq.middleCols(h * dh, dh).noalias() = d_scores * k;
    dk.middleCols(h * dh, dh).noalias() = d_scores.transpose() * q;
  }
  dx += affine_backward(lt.input, p.query, dq, g.query, g.query_bias);
  dx += affine_backward(lt.input, p.key, dk, g.key, g.key_bias);
  dx += affine_backward(lt.input, p.value, dv, g.value, g.value_bias);
  return dx;
}

}  // namespace

void EncoderConfig::validate() const {
  if (layers < 1) throw Error("encoder needs at least one layer");
  if (heads < 1 || hidden < 1 || hidden % heads != 0) {
    throw Error("hidden size " + std::to_string(hidden) + " must be a positive multiple of heads " +
                std::to_string(heads));
  }
  if (ffn_dim < 1) throw Error("ffn_dim must be positive");
  if (vocab_size <= Vocabulary::kNumSpecial) throw Error("vocab_size must exceed the special tokens");
  if (max_len < 2) throw Error("max_len must be at least 2");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must lie in [0, 1)");
}

EncoderParameters EncoderParameters::zeros(const EncoderConfig& c) {
  c.validate();
  EncoderParameters p;
  p.token_embedding = Matrix::Zero(c.vocab_size, c.hidden);
  p.position_embedding = Matrix::Zero(c.max_len, c.hidden);
  p.segment_embedding = Matrix::Zero(2, c.hidden);
  p.embed_norm_gamma = Matrix::Zero(1, c.hidden);
  p.embed_norm_beta = Matrix::Zero(1, c.hidden);
  p.layers.resize(static_cast<std::size_t>(c.layers));
  for (auto& l : p.layers) {
    for (Matrix* m : {&l.query, &l.key, &l.value, &l.output}) *m = Matrix::Zero(c.hidden, c.hidden);
    for (Matrix* m : {&l.query_bias, &l.key_bias, &l.value_bias, &l.output_bias, &l.attn_norm_gamma,
                      &l.attn_norm_beta, &l.ffn_out_bias, &l.ffn_norm_gamma, &l.ffn_norm_beta}) {
      *m = Matrix::Zero(1, c.hidden);
    }
    l.ffn_in = Matrix::Zero(c.hidden, c.ffn_dim);
    l.ffn_in_bias = Matrix::Zero(1, c.ffn_dim);
    l.ffn_out = Matrix::Zero(c.ffn_dim, c.hidden);
  }
  p.mlm_weight = Matrix::Zero(c.hidden, c.vocab_size);
  p.mlm_bias = Matrix::Zero(1, c.vocab_size);
  p.cls_hidden = Matrix::Zero(c.hidden, c.hidden);
  p.cls_hidden_bias = Matrix::Zero(1, c.hidden);
  p.cls_output = Matrix::Zero(c.hidden, 1);
  p.cls_output_bias = Matrix::Zero(1, 1);
  return p;
}

void EncoderParameters::set_zero() {
  for_each([](const std::string&, Matrix& m) { m.setZero(); });
}

std::size_t EncoderParameters::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool EncoderParameters::all_finite() const {
  bool ok = true;
  for_each([&ok](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

EncoderParameters init_parameters(const EncoderConfig& config, std::uint64_t seed) {
  EncoderParameters p = EncoderParameters::zeros(config);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  p.for_each([&](const std::string& name, Matrix& m) {
    if (ends_with(name, "gamma")) {
      m.setOnes();
    } else if (ends_with(name, "bias") || ends_with(name, "beta") || name == "cls.output.weight") {
      m.setZero();
    } else {
      // 1/sqrt(fan-in); embeddings use the hidden width. A fixed 0.02 leaves
      // attention logits near zero at small widths and training stalls.
      const auto fan_in = name.starts_with("embeddings.") ? config.hidden : m.rows();
      const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * normal(rng);
    }
  });
  round_to_storage_precision(p);
  return p;
}

void round_to_storage_precision(EncoderParameters& params) {
  params.for_each([](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    }
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

AttentionMaps ForwardTrace::attention() const {
  AttentionMaps maps;
  maps.reserve(layers.size());
  for (const auto& l : layers) maps.push_back(l.probs);
  return maps;
}

Encoder::Encoder(EncoderConfig config, EncoderParameters params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  EncoderParameters reference = EncoderParameters::zeros(config_);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  reference.for_each([&](const std::string&, const Matrix& m) { shapes.emplace_back(m.rows(), m.cols()); });
  std::size_t i = 0;
  bool ok = params_.layers.size() == reference.layers.size();
  if (ok) {
    params_.for_each([&](const std::string& name, const Matrix& m) {
      if (i >= shapes.size() || shapes[i] != std::make_pair(m.rows(), m.cols())) {
        throw ShapeError("parameter '" + name + "' has shape inconsistent with the config");
      }
      ++i;
    });
  }
  if (!ok || i != shapes.size()) throw ShapeError("parameter tree does not match the encoder config");
}

void Encoder::check_input(std::span<const int> ids, std::span<const int> segments) const {
  if (ids.empty()) throw Error("empty input sequence");
  if (ids.size() != segments.size()) throw Error("token and segment sequences differ in length");
  if (ids.size() > static_cast<std::size_t>(config_.max_len)) {
    throw Error("input of length " + std::to_string(ids.size()) + " exceeds max_len " +
                std::to_string(config_.max_len));
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= config_.vocab_size) {
      throw Error("token id " + std::to_string(ids[t]) + " outside vocabulary");
    }
    if (segments[t] != 0 && segments[t] != 1) throw Error("segment ids must be 0 or 1");
  }
}

ForwardTrace Encoder::forward(std::span<const int> ids, std::span<const int> segments,
                              Rng* dropout_rng) const {
  check_input(ids, segments);
  const auto n = static_cast<Eigen::Index>(ids.size());
  ForwardTrace trace;
  trace.token_ids.assign(ids.begin(), ids.end());
  trace.segment_ids.assign(segments.begin(), segments.end());

  Matrix x(n, config_.hidden);
  for (Eigen::Index t = 0; t < n; ++t) {
    x.row(t) = params_.token_embedding.row(ids[static_cast<std::size_t>(t)]) +
               params_.position_embedding.row(t) +
               params_.segment_embedding.row(segments[static_cast<std::size_t>(t)]);
  }
  x = layer_norm(x, params_.embed_norm_gamma, params_.embed_norm_beta, trace.embed_norm);
  trace.embed_dropout = dropout_mask(n, config_.hidden, config_.dropout, dropout_rng);
  apply_mask(x, trace.embed_dropout);

  trace.layers.resize(params_.layers.size());
  for (std::size_t l = 0; l < params_.layers.size(); ++l) {
    x = layer_forward(params_.layers[l], config_, x, trace.layers[l], dropout_rng);
  }
  trace.hidden = std::move(x);

  const Matrix cls = trace.hidden.topRows(1);
  trace.cls_activation = affine(cls, params_.cls_hidden, params_.cls_hidden_bias).array().tanh().matrix();
  trace.score = (trace.cls_activation * params_.cls_output)(0, 0) + params_.cls_output_bias(0, 0);
  return trace;
}

Encoding Encoder::encode(std::span<const int> ids, std::span<const int> segments) const {
  ForwardTrace trace = forward(ids, segments);
  return {std::move(trace.hidden), trace.attention()};
}

double Encoder::cls_score(std::span<const int> ids, std::span<const int> segments) const {
  if (ids.empty() || ids[0] != Vocabulary::kCls) throw Error("score input must begin with [CLS]");
  return forward(ids, segments).score;
}

Matrix Encoder::mlm_logits(const Matrix& hidden, std::span<const int> positions) const {
  Matrix gathered(static_cast<Eigen::Index>(positions.size()), config_.hidden);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || positions[i] >= hidden.rows()) throw Error("masked position out of range");
    gathered.row(static_cast<Eigen::Index>(i)) = hidden.row(positions[i]);
  }
  return affine(gathered, params_.mlm_weight, params_.mlm_bias);
}

void Encoder::backward(const ForwardTrace& trace, const SequenceGradient& upstream,
                       Gradients& g) const {
  const Eigen::Index n = trace.hidden.rows();
  Matrix dh = Matrix::Zero(n, config_.hidden);

  if (upstream.d_score != 0.0) {
    const double ds = upstream.d_score;
    const Matrix& act = trace.cls_activation;
    g.cls_output.noalias() += act.transpose() * ds;
    g.cls_output_bias(0, 0) += ds;
    const Matrix d_act = params_.cls_output.transpose() * ds;
    const Matrix d_pre = (d_act.array() * (1.0 - act.array().square())).matrix();
    const Matrix cls = trace.hidden.topRows(1);
    dh.topRows(1) += affine_backward(cls, params_.cls_hidden, d_pre, g.cls_hidden, g.cls_hidden_bias);
  }

  if (!upstream.mlm_positions.empty()) {
    const auto m = static_cast<Eigen::Index>(upstream.mlm_positions.size());
    if (upstream.d_mlm_logits.rows() != m || upstream.d_mlm_logits.cols() != config_.vocab_size) {
      throw ShapeError("MLM logit gradient has the wrong shape");
    }
    Matrix gathered(m, config_.hidden);
    for (Eigen::Index i = 0; i < m; ++i) gathered.row(i) = trace.hidden.row(upstream.mlm_positions[static_cast<std::size_t>(i)]);
    const Matrix d_gathered =
        affine_backward(gathered, params_.mlm_weight, upstream.d_mlm_logits, g.mlm_weight, g.mlm_bias);
    for (Eigen::Index i = 0; i < m; ++i) dh.row(upstream.mlm_positions[static_cast<std::size_t>(i)]) += d_gathered.row(i);
  }

  for (std::size_t l = params_.layers.size(); l-- > 0;) {
    dh = layer_backward(params_.layers[l], config_, trace.layers[l], dh, g.layers[l]);
  }

  apply_mask(dh, trace.embed_dropout);
  const Matrix d_sum = layer_norm_backward(dh, params_.embed_norm_gamma, trace.embed_norm,
                                           g.embed_norm_gamma, g.embed_norm_beta);
  for (Eigen::Index t = 0; t < n; ++t) {
    g.token_embedding.row(trace.token_ids[static_cast<std::size_t>(t)]) += d_sum.row(t);
    g.position_embedding.row(t) += d_sum.row(t);
    g.segment_embedding.row(trace.segment_ids[static_cast<std::size_t>(t)]) += d_sum.row(t);
  }
}

std::vector<double> attention_from_position(const AttentionMaps& attention, std::size_t layer,
                                            std::span<const std::size_t> query_positions) {
  if (query_positions.empty()) throw Error("attention query positions must be non-empty");
  if (layer >= attention.size() || attention[layer].empty()) throw Error("attention layer out of range");
  const auto& heads = attention[layer];
  const Eigen::Index n = heads.front().cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(n);
  for (std::size_t pos : query_positions) {
    if (static_cast<Eigen::Index>(pos) >= heads.front().rows()) throw Error("attention query position out of range");
    for (const auto& head : heads) sum += head.row(static_cast<Eigen::Index>(pos));
  }
  sum /= static_cast<double>(heads.size() * query_positions.size());
  return {sum.data(), sum.data() + n};
}

}  // namespace anchorpt
