#include "nrdr/decoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>

#include "nrdr/errors.hpp"
#include "nrdr/rng.hpp"
#include "json_util.hpp"

namespace nrdr {

const char* to_string(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::Tabular: return "tabular";
    case DecoderVariant::Mlp: return "mlp";
    case DecoderVariant::TransformerEncoder: return "transformer_encoder";
    case DecoderVariant::NaiveQuery: return "naive_query";
  }
  return "?";
}

DecoderVariant decoder_variant_from_string(const std::string& s) {
  if (s == "tabular") return DecoderVariant::Tabular;
  if (s == "mlp") return DecoderVariant::Mlp;
  if (s == "transformer_encoder") return DecoderVariant::TransformerEncoder;
  if (s == "naive_query") return DecoderVariant::NaiveQuery;
  throw ConfigError("unknown decoder variant '" + s + "'");
}

void DecoderConfig::validate() const {
  if (feature_dim < 1 || hidden_dim < 1 || num_heads < 1 || num_layers < 1)
    throw ConfigError("decoder config: dims, heads, and layers must be >= 1");
  if (feature_dim % num_heads != 0)
    throw ConfigError("decoder config: feature_dim must be divisible by num_heads");
  if (!(max_offset > 0.0))
    throw ConfigError("decoder config: max_offset must be positive");
  if (num_queries < 1)
    throw ConfigError("decoder config: num_queries must be >= 1");
  if (!(query_position_scale > 0.0))
    throw ConfigError("decoder config: query_position_scale must be positive");
}

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

MatX map_gelu(const MatX& m) { return m.unaryExpr([](double v) { return gelu(v); }); }

MatX map_gelu_grad(const MatX& m) {
  return m.unaryExpr([](double v) { return gelu_grad(v); });
}

// out = in * W^T + 1 b^T
MatX linear(const MatX& in, const MatX& w, const MatX& b) {
  return (in * w.transpose()).rowwise() + b.col(0).transpose();
}

MatX colsum_as_col(const MatX& g) { return g.colwise().sum().transpose(); }

// Allocate every tensor the variant uses, zero-filled.
DecoderWeights shaped(const DecoderConfig& cfg, int table_rows) {
  cfg.validate();
  DecoderWeights w;
  w.config = cfg;
  w.table_rows = table_rows;
  const int f = cfg.feature_dim, h = cfg.hidden_dim;

  if (cfg.variant == DecoderVariant::Tabular) {
    if (table_rows < 1)
      throw ConfigError("tabular decoder: needs a positive ray count");
    w.table = MatX::Zero(table_rows, 7);
    return w;
  }

  w.pos_embed = MatX::Zero(f, 3);
  if (cfg.variant == DecoderVariant::Mlp) {
    w.mlp_w1 = MatX::Zero(h, f);
    w.mlp_b1 = MatX::Zero(h, 1);
    w.mlp_w2 = MatX::Zero(f, h);
    w.mlp_b2 = MatX::Zero(f, 1);
  } else {
    if (cfg.variant == DecoderVariant::NaiveQuery)
      w.queries = MatX::Zero(cfg.num_queries, f);
    w.layers.resize(cfg.num_layers);
    for (auto& layer : w.layers) {
      layer.wq = MatX::Zero(f, f);
      layer.wk = MatX::Zero(f, f);
      layer.wv = MatX::Zero(f, f);
      layer.wo = MatX::Zero(f, f);
      layer.ff_w1 = MatX::Zero(h, f);
      layer.ff_b1 = MatX::Zero(h, 1);
      layer.ff_w2 = MatX::Zero(f, h);
      layer.ff_b2 = MatX::Zero(f, 1);
    }
  }
  w.head_r_w = MatX::Zero(1, f);
  w.head_r_b = MatX::Zero(1, 1);
  w.head_off_w = MatX::Zero(3, f);
  w.head_off_b = MatX::Zero(3, 1);
  w.head_scale_w = MatX::Zero(3, f);
  w.head_scale_b = MatX::Zero(3, 1);
  return w;
}

const double kInitLogitR = std::log(0.1 / 0.9);  // start sparse: r = 0.1
const double kInitLogScale = std::log(0.5);

}  // namespace

DecoderWeights DecoderWeights::init(const DecoderConfig& cfg, int num_rays,
                                    std::uint64_t seed) {
  DecoderWeights w = shaped(cfg, cfg.variant == DecoderVariant::Tabular
                                     ? num_rays
                                     : 0);
  Rng rng(seed);
  w.for_each_tensor([&](const std::string& name, MatX& m) {
    if (name == "table") {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, 0) = kInitLogitR;
        for (int c = 4; c < 7; ++c) m(r, c) = kInitLogScale;
      }
      return;
    }
    if (m.cols() == 1) {  // biases
      if (name == "head_r_b") m(0, 0) = kInitLogitR;
      if (name == "head_scale_b") m.setConstant(kInitLogScale);
      return;
    }
    // Position embeddings start small: return positions are in meters (tens
    // of units), and an O(1) map would swamp the rendered features.
    const double scale = (name == "pos_embed" ? 0.01 : 1.0) /
                         std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * rng.normal();
  });
  return w;
}

DecoderWeights DecoderWeights::zeros_like() const {
  return shaped(config, table_rows);
}

void DecoderWeights::validate() const {
  const DecoderWeights ref = shaped(config, table_rows);
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> expect;
  ref.for_each_tensor([&](const std::string& name, const MatX& m) {
    expect[name] = {m.rows(), m.cols()};
  });
  std::size_t seen = 0;
  for_each_tensor([&](const std::string& name, const MatX& m) {
    auto it = expect.find(name);
    if (it == expect.end() || it->second.first != m.rows() ||
        it->second.second != m.cols())
      throw ConfigError("decoder weights: tensor '" + name +
                        "' has a shape inconsistent with the config");
    if (m.size() > 0 && !m.allFinite())
      throw NumericError("decoder weights: tensor '" + name + "' not finite");
    ++seen;
  });
  if (seen != expect.size())
    throw ConfigError("decoder weights: tensor set inconsistent with config");
}

MatX embed_and_fuse(const std::vector<RayRender>& renders,
                    const DecoderWeights& weights) {
  if (renders.empty()) throw DataError("decode: no renders");
  const int f = static_cast<int>(weights.pos_embed.rows());
  MatX fused(renders.size(), f);
  for (std::size_t i = 0; i < renders.size(); ++i) {
    if (renders[i].feature.size() != f)
      throw DataError("decode: render feature dim mismatch");
    fused.row(i) = renders[i].feature.transpose() +
                   (weights.pos_embed * renders[i].return_position).transpose();
  }
  return fused;
}

namespace {

void check_compatible(const DecoderWeights& weights, const DecoderConfig& cfg) {
  if (weights.config.variant != cfg.variant ||
      weights.config.feature_dim != cfg.feature_dim ||
      weights.config.hidden_dim != cfg.hidden_dim ||
      weights.config.num_heads != cfg.num_heads ||
      weights.config.num_layers != cfg.num_layers ||
      (cfg.variant == DecoderVariant::NaiveQuery &&
       weights.config.num_queries != cfg.num_queries))
    throw ConfigError("decode: weights were built for a different config");
  weights.validate();
}

// One attention + feed-forward block. kv==query gives self-attention.
MatX attention_forward(const AttentionLayerWeights& lw, const MatX& query_in,
                       const MatX& kv_in, int num_heads,
                       ForwardCache::LayerCache* lc) {
  const int f = static_cast<int>(lw.wq.rows());
  const int dh = f / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  const MatX q = query_in * lw.wq.transpose();
  const MatX k = kv_in * lw.wk.transpose();
  const MatX v = kv_in * lw.wv.transpose();

  MatX concat(query_in.rows(), f);
  std::vector<MatX> probs(num_heads);
  for (int hd = 0; hd < num_heads; ++hd) {
    const auto qh = q.middleCols(hd * dh, dh);
    const auto kh = k.middleCols(hd * dh, dh);
    const auto vh = v.middleCols(hd * dh, dh);
    MatX scores = qh * kh.transpose() * inv_sqrt_dh;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      const double m = scores.row(r).maxCoeff();
      Eigen::ArrayXd e = (scores.row(r).array() - m).exp();
      scores.row(r) = (e / e.sum()).matrix();
    }
    concat.middleCols(hd * dh, dh) = scores * vh;
    probs[hd] = std::move(scores);
  }
  const MatX attn_out = concat * lw.wo.transpose();
  const MatX ff_pre1 = linear(attn_out, lw.ff_w1, lw.ff_b1);
  const MatX ff_act1 = map_gelu(ff_pre1);
  MatX out = linear(ff_act1, lw.ff_w2, lw.ff_b2);

  if (lc) {
    lc->input = query_in;
    lc->q = q;
    lc->k = k;
    lc->v = v;
    lc->probs = std::move(probs);
    lc->attn_concat = concat;
    lc->attn_out = attn_out;
    lc->ff_pre1 = ff_pre1;
    lc->ff_act1 = ff_act1;
  }
  return out;
}

// Returns the gradient w.r.t. query_in; accumulates into g_kv_in and the
// layer's weight gradients.
MatX attention_backward(const AttentionLayerWeights& lw,
                        const ForwardCache::LayerCache& lc, const MatX& kv_in,
                        int num_heads, const MatX& g_out,
                        AttentionLayerWeights& g_lw, MatX& g_kv_in) {
  const int f = static_cast<int>(lw.wq.rows());
  const int dh = f / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  g_lw.ff_w2 += g_out.transpose() * lc.ff_act1;
  g_lw.ff_b2 += colsum_as_col(g_out);
  const MatX g_act1 = g_out * lw.ff_w2;
  const MatX g_pre1 = g_act1.cwiseProduct(map_gelu_grad(lc.ff_pre1));
  g_lw.ff_w1 += g_pre1.transpose() * lc.attn_out;
  g_lw.ff_b1 += colsum_as_col(g_pre1);
  const MatX g_attn_out = g_pre1 * lw.ff_w1;

  g_lw.wo += g_attn_out.transpose() * lc.attn_concat;
  const MatX g_concat = g_attn_out * lw.wo;

  MatX g_q = MatX::Zero(lc.q.rows(), f);
  MatX g_k = MatX::Zero(lc.k.rows(), f);
  MatX g_v = MatX::Zero(lc.v.rows(), f);
  for (int hd = 0; hd < num_heads; ++hd) {
    const auto vh = lc.v.middleCols(hd * dh, dh);
    const auto qh = lc.q.middleCols(hd * dh, dh);
    const auto kh = lc.k.middleCols(hd * dh, dh);
    const MatX& p = lc.probs[hd];
    const auto g_oh = g_concat.middleCols(hd * dh, dh);

    const MatX g_p = g_oh * vh.transpose();
    g_v.middleCols(hd * dh, dh) += p.transpose() * g_oh;

    MatX g_s(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dot = g_p.row(r).dot(p.row(r));
      g_s.row(r) =
          p.row(r).cwiseProduct(g_p.row(r) - MatX::Constant(1, p.cols(), dot));
    }
    g_s *= inv_sqrt_dh;
    g_q.middleCols(hd * dh, dh) += g_s * kh;
    g_k.middleCols(hd * dh, dh) += g_s.transpose() * qh;
  }

  g_lw.wq += g_q.transpose() * lc.input;
  g_lw.wk += g_k.transpose() * kv_in;
  g_lw.wv += g_v.transpose() * kv_in;
  g_kv_in += g_k * lw.wk + g_v * lw.wv;
  return g_q * lw.wq;
}

}  // namespace

PredictionParams decode(const std::vector<RayRender>& renders,
                        const DecoderWeights& weights, const DecoderConfig& cfg,
                        ForwardCache* cache) {
  check_compatible(weights, cfg);
  if (renders.empty()) throw DataError("decode: no renders");

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc = ForwardCache{};

  const std::size_t n_renders = renders.size();
  PredictionParams out;

  if (cfg.variant == DecoderVariant::Tabular) {
    fc.table_rows.resize(n_renders);
    out.anchors.resize(n_renders);
    out.offsets.resize(n_renders);
    out.logit_r.resize(n_renders);
    out.log_scales.resize(n_renders);
    fc.raw_offsets.resize(n_renders, 3);
    for (std::size_t i = 0; i < n_renders; ++i) {
      const int row = renders[i].source_index;
      if (row < 0 || row >= weights.table_rows)
        throw DataError("tabular decoder: render source index " +
                        std::to_string(row) + " outside the table");
      fc.table_rows[i] = row;
      out.anchors[i] = renders[i].return_position;
      out.logit_r[i] = weights.table(row, 0);
      Vec3 raw(weights.table(row, 1), weights.table(row, 2), weights.table(row, 3));
      fc.raw_offsets.row(i) = raw.transpose();
      out.offsets[i] = cfg.baseline_zero_offset
                           ? Vec3::Zero()
                           : Vec3(cfg.max_offset * raw.array().tanh());
      out.log_scales[i] = Vec3(weights.table(row, 4), weights.table(row, 5),
                               weights.table(row, 6));
    }
    fc.valid = true;
    return out;
  }

  const int f = cfg.feature_dim;
  fc.features.resize(n_renders, f);
  fc.positions.resize(n_renders, 3);
  for (std::size_t i = 0; i < n_renders; ++i) {
    if (renders[i].feature.size() != f)
      throw DataError("decode: render feature dim mismatch");
    fc.features.row(i) = renders[i].feature.transpose();
    fc.positions.row(i) = renders[i].return_position.transpose();
  }
  fc.fused = fc.features + fc.positions * weights.pos_embed.transpose();

  if (cfg.variant == DecoderVariant::Mlp) {
    fc.mlp_pre1 = linear(fc.fused, weights.mlp_w1, weights.mlp_b1);
    fc.mlp_act1 = map_gelu(fc.mlp_pre1);
    fc.trunk_out = linear(fc.mlp_act1, weights.mlp_w2, weights.mlp_b2);
  } else if (cfg.variant == DecoderVariant::TransformerEncoder) {
    fc.layers.resize(cfg.num_layers);
    MatX x = fc.fused;
    for (int l = 0; l < cfg.num_layers; ++l)
      x = attention_forward(weights.layers[l], x, x, cfg.num_heads,
                            &fc.layers[l]);
    fc.trunk_out = std::move(x);
  } else {  // NaiveQuery: queries cross-attend to the fused ray features
    fc.layers.resize(cfg.num_layers);
    MatX x = weights.queries;
    for (int l = 0; l < cfg.num_layers; ++l)
      x = attention_forward(weights.layers[l], x, fc.fused, cfg.num_heads,
                            &fc.layers[l]);
    fc.trunk_out = std::move(x);
  }

  const MatX logit = linear(fc.trunk_out, weights.head_r_w, weights.head_r_b);
  fc.raw_offsets = linear(fc.trunk_out, weights.head_off_w, weights.head_off_b);
  const MatX log_scale =
      linear(fc.trunk_out, weights.head_scale_w, weights.head_scale_b);

  const std::size_t n_out = static_cast<std::size_t>(fc.trunk_out.rows());
  out.anchors.resize(n_out);
  out.offsets.resize(n_out);
  out.logit_r.resize(n_out);
  out.log_scales.resize(n_out);
  const bool naive = cfg.variant == DecoderVariant::NaiveQuery;
  // NaiveQuery has no per-ray anchor, so its "offset" is the absolute
  // position; the tanh squash then needs a scene-sized scale.
  const double offset_scale = naive ? cfg.query_position_scale : cfg.max_offset;
  for (std::size_t i = 0; i < n_out; ++i) {
    out.anchors[i] = naive ? Vec3::Zero() : renders[i].return_position;
    out.offsets[i] =
        cfg.baseline_zero_offset
            ? Vec3::Zero()
            : Vec3(offset_scale * fc.raw_offsets.row(i).transpose().array().tanh());
    out.logit_r[i] = logit(i, 0);
    out.log_scales[i] = log_scale.row(i).transpose();
  }
  fc.valid = true;
  return out;
}

DecoderWeights backward(const std::vector<RayRender>& renders,
                        const DecoderWeights& weights, const DecoderConfig& cfg,
                        const ForwardCache& cache,
                        const PredictionGradient& output_grad) {
  check_compatible(weights, cfg);
  if (!cache.valid) throw DataError("decoder backward: missing forward cache");

  const std::size_t n_out = output_grad.logit_r.size();
  if (output_grad.offsets.size() != n_out ||
      output_grad.log_scales.size() != n_out)
    throw DataError("decoder backward: gradient size mismatch");

  DecoderWeights grad = weights.zeros_like();

  // Offset gradients flow through delta = scale * tanh(raw); the zero-offset
  // baseline blocks them entirely.
  const double offset_scale = cfg.variant == DecoderVariant::NaiveQuery
                                  ? cfg.query_position_scale
                                  : cfg.max_offset;
  MatX g_raw = MatX::Zero(n_out, 3);
  MatX g_logit(n_out, 1);
  MatX g_log_scale(n_out, 3);
  for (std::size_t i = 0; i < n_out; ++i) {
    g_logit(i, 0) = output_grad.logit_r[i];
    g_log_scale.row(i) = output_grad.log_scales[i].transpose();
    if (cfg.baseline_zero_offset) continue;
    const Eigen::Array3d t = cache.raw_offsets.row(i).transpose().array().tanh();
    g_raw.row(i) =
        (output_grad.offsets[i].array() * offset_scale * (1.0 - t * t))
            .matrix()
            .transpose();
  }

  if (cfg.variant == DecoderVariant::Tabular) {
    if (cache.table_rows.size() != n_out)
      throw DataError("decoder backward: cache/gradient size mismatch");
    for (std::size_t i = 0; i < n_out; ++i) {
      const int row = cache.table_rows[i];
      grad.table(row, 0) += g_logit(i, 0);
      for (int a = 0; a < 3; ++a) {
        grad.table(row, 1 + a) += g_raw(i, a);
        grad.table(row, 4 + a) += g_log_scale(i, a);
      }
    }
    return grad;
  }

  if (static_cast<std::size_t>(cache.trunk_out.rows()) != n_out)
    throw DataError("decoder backward: cache/gradient size mismatch");

  grad.head_r_w += g_logit.transpose() * cache.trunk_out;
  grad.head_r_b += colsum_as_col(g_logit);
  grad.head_off_w += g_raw.transpose() * cache.trunk_out;
  grad.head_off_b += colsum_as_col(g_raw);
  grad.head_scale_w += g_log_scale.transpose() * cache.trunk_out;
  grad.head_scale_b += colsum_as_col(g_log_scale);

  MatX g_trunk = g_logit * weights.head_r_w + g_raw * weights.head_off_w +
                 g_log_scale * weights.head_scale_w;

  MatX g_fused;
  if (cfg.variant == DecoderVariant::Mlp) {
    grad.mlp_w2 += g_trunk.transpose() * cache.mlp_act1;
    grad.mlp_b2 += colsum_as_col(g_trunk);
    const MatX g_act1 = g_trunk * weights.mlp_w2;
    const MatX g_pre1 = g_act1.cwiseProduct(map_gelu_grad(cache.mlp_pre1));
    grad.mlp_w1 += g_pre1.transpose() * cache.fused;
    grad.mlp_b1 += colsum_as_col(g_pre1);
    g_fused = g_pre1 * weights.mlp_w1;
  } else if (cfg.variant == DecoderVariant::TransformerEncoder) {
    MatX g_x = std::move(g_trunk);
    for (int l = cfg.num_layers - 1; l >= 0; --l) {
      const MatX& kv = cache.layers[l].input;  // self-attention
      MatX g_kv = MatX::Zero(kv.rows(), kv.cols());
      const MatX g_query = attention_backward(weights.layers[l], cache.layers[l],
                                              kv, cfg.num_heads, g_x,
                                              grad.layers[l], g_kv);
      g_x = g_query + g_kv;
    }
    g_fused = std::move(g_x);
  } else {  // NaiveQuery
    g_fused = MatX::Zero(cache.fused.rows(), cache.fused.cols());
    MatX g_x = std::move(g_trunk);
    for (int l = cfg.num_layers - 1; l >= 0; --l) {
      g_x = attention_backward(weights.layers[l], cache.layers[l], cache.fused,
                               cfg.num_heads, g_x, grad.layers[l], g_fused);
    }
    grad.queries += g_x;
  }

  grad.pos_embed += g_fused.transpose() * cache.positions;
  (void)renders;
  return grad;
}

PointCloud emit_deterministic(const PredictionParams& params,
                              const RadarConfig& radar) {
  params.validate();
  PointCloud cloud;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params.existence(i) > radar.confidence_threshold)
      cloud.points.push_back(params.position(i));
  return cloud;
}

MultiBernoulli to_multi_bernoulli(const PredictionParams& params,
                                  const RadarConfig& radar) {
  params.validate();
  MultiBernoulli mb;
  mb.components.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    BernoulliComponent& c = mb.components[i];
    c.r = params.existence(i);
    c.anchor = params.anchors[i];
    const Vec3 mu = params.position(i);
    AxisDensity* axes[3] = {&c.x, &c.y, &c.z};
    for (int a = 0; a < 3; ++a) {
      axes[a]->family = radar.density_family;
      axes[a]->mu = mu[a];
      axes[a]->scale = std::exp(params.log_scales[i][a]);
    }
  }
  return mb;
}

PointCloud emit_probabilistic(const PredictionParams& params,
                              const DecoderConfig& cfg, const RadarConfig& radar,
                              std::uint64_t seed) {
  if (!cfg.probabilistic)
    throw ConfigError("emit_probabilistic: decoder config is not probabilistic");
  return mb_sample(to_multi_bernoulli(params, radar), seed);
}

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train config: iterations must be >= 1");
  if (warmup_steps < 0 || warmup_steps > iterations)
    throw ConfigError("train config: warmup_steps must be in [0, iterations]");
  if (!(lr_min > 0.0) || !(lr_max >= lr_min))
    throw ConfigError("train config: need lr_max >= lr_min > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0))
    throw ConfigError("train config: invalid Adam parameters");
  if (!(loss_weight > 0.0))
    throw ConfigError("train config: loss_weight must be positive");
}

double TrainConfig::learning_rate(int iteration) const {
  if (iteration < warmup_steps)
    return lr_max * static_cast<double>(iteration + 1) / warmup_steps;
  const int span = iterations - warmup_steps;
  if (span <= 1) return lr_min;
  const double u =
      static_cast<double>(iteration - warmup_steps) / (span - 1);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * u));
}

FitResult fit(const Scene& scene, const std::vector<SensorPose>& poses,
              const std::vector<PointCloud>& truths, const RadarConfig& radar,
              const OpacityParams& opacity, const DecoderConfig& cfg,
              const TrainConfig& train) {
  radar.validate();
  opacity.validate();
  cfg.validate();
  train.validate();
  if (poses.empty() || poses.size() != truths.size())
    throw DataError("fit: poses and truths must align and be nonempty");

  const int num_scans = static_cast<int>(poses.size());
  std::vector<std::vector<RayRender>> renders(num_scans);
  int num_rays = 0;
  for (int k = 0; k < num_scans; ++k) {
    const RayBundle bundle = build_ray_grid(poses[k], radar);
    num_rays = static_cast<int>(bundle.rays.size());
    renders[k] =
        render_bundle(scene, bundle, radar, opacity, mix_seed(train.seed, 1000 + k));
  }

  const int num_preds =
      cfg.variant == DecoderVariant::NaiveQuery ? cfg.num_queries : num_rays;
  for (int k = 0; k < num_scans; ++k) {
    truths[k].validate();
    if (static_cast<std::size_t>(num_preds) <= truths[k].size())
      throw DataError("fit: scan " + std::to_string(k) +
                      " has as many truth points as predictions (" +
                      std::to_string(truths[k].size()) + " vs " +
                      std::to_string(num_preds) + ")");
  }

  DecoderWeights weights = DecoderWeights::init(cfg, num_rays, mix_seed(train.seed, 1));

  // Adam state, aligned with the canonical tensor order.
  std::vector<MatX> m1, m2;
  weights.for_each_tensor([&](const std::string&, const MatX& t) {
    m1.push_back(MatX::Zero(t.rows(), t.cols()));
    m2.push_back(MatX::Zero(t.rows(), t.cols()));
  });

  FitResult result;
  result.loss_curve.reserve(train.iterations);

  for (int it = 0; it < train.iterations; ++it) {
    const int scan = it % num_scans;
    ForwardCache cache;
    const PredictionParams params = decode(renders[scan], weights, cfg, &cache);
    const LossReport report =
        cfg.probabilistic
            ? probabilistic_loss(params, truths[scan], radar.density_family)
            : deterministic_loss(params, truths[scan]);
    const double weighted = train.loss_weight * report.total;
    if (!std::isfinite(weighted))
      throw NumericError("fit: loss diverged at iteration " + std::to_string(it));
    result.loss_curve.push_back(weighted);

    PredictionGradient scaled = report.gradient;
    for (std::size_t i = 0; i < scaled.logit_r.size(); ++i) {
      scaled.logit_r[i] *= train.loss_weight;
      scaled.offsets[i] *= train.loss_weight;
      scaled.log_scales[i] *= train.loss_weight;
    }
    const DecoderWeights grad = backward(renders[scan], weights, cfg, cache, scaled);

    const double lr = train.learning_rate(it);
    const double bc1 = 1.0 - std::pow(train.adam_beta1, it + 1);
    const double bc2 = 1.0 - std::pow(train.adam_beta2, it + 1);
    std::vector<const MatX*> grads;
    grad.for_each_tensor(
        [&](const std::string&, const MatX& g) { grads.push_back(&g); });
    std::size_t slot = 0;
    weights.for_each_tensor([&](const std::string&, MatX& t) {
      const MatX& g = *grads[slot];
      MatX& m = m1[slot];
      MatX& v = m2[slot];
      m = train.adam_beta1 * m + (1.0 - train.adam_beta1) * g;
      v = (train.adam_beta2 * v.array() +
           (1.0 - train.adam_beta2) * g.array().square())
              .matrix();
      t -= (lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + train.adam_eps))
               .matrix();
      ++slot;
    });
  }

  result.weights = std::move(weights);
  return result;
}

// --- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'N', 'R', 'D', 'R', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

Json decoder_config_sidecar(const DecoderConfig& cfg, int table_rows) {
  Json j;
  j["format"] = "NRDR1";
  j["variant"] = to_string(cfg.variant);
  j["feature_dim"] = cfg.feature_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["num_heads"] = cfg.num_heads;
  j["num_layers"] = cfg.num_layers;
  j["max_offset"] = cfg.max_offset;
  j["probabilistic"] = cfg.probabilistic;
  j["baseline_zero_offset"] = cfg.baseline_zero_offset;
  j["num_queries"] = cfg.num_queries;
  j["query_position_scale"] = cfg.query_position_scale;
  j["table_rows"] = table_rows;
  return j;
}

}  // namespace

void DecoderWeights::save(const std::string& path) const {
  validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("decoder weights: cannot write '" + path + "'");
  out.write(kMagic, 5);

  std::uint32_t count = 0;
  for_each_tensor([&](const std::string&, const MatX&) { ++count; });
  put_u32(out, count);

  for_each_tensor([&](const std::string& name, const MatX& m) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  });
  if (!out) throw DataError("decoder weights: write failed for '" + path + "'");

  std::ofstream side(path + ".json");
  if (!side) throw DataError("decoder weights: cannot write '" + path + ".json'");
  side << decoder_config_sidecar(config, table_rows).dump(2) << "\n";
}

DecoderWeights DecoderWeights::load(const std::string& path) {
  std::ifstream side_in(path + ".json");
  if (!side_in)
    throw DataError("decoder weights: missing sidecar '" + path + ".json'");
  Json side;
  try {
    side = Json::parse(side_in);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("decoder weights: invalid sidecar JSON: ") +
                    e.what());
  }
  check_keys(side, "weights sidecar",
             {"format", "variant", "feature_dim", "hidden_dim", "num_heads",
              "num_layers", "max_offset", "probabilistic",
              "baseline_zero_offset", "num_queries", "query_position_scale",
              "table_rows"});
  if (get_string(side, "weights sidecar", "format") != "NRDR1")
    throw DataError("decoder weights: unsupported container format");

  DecoderConfig cfg;
  cfg.variant = decoder_variant_from_string(
      get_string(side, "weights sidecar", "variant"));
  cfg.feature_dim = static_cast<int>(get_int(side, "weights sidecar", "feature_dim"));
  cfg.hidden_dim = static_cast<int>(get_int(side, "weights sidecar", "hidden_dim"));
  cfg.num_heads = static_cast<int>(get_int(side, "weights sidecar", "num_heads"));
  cfg.num_layers = static_cast<int>(get_int(side, "weights sidecar", "num_layers"));
  cfg.max_offset = get_number(side, "weights sidecar", "max_offset");
  cfg.probabilistic = get_bool_or(side, "weights sidecar", "probabilistic", false);
  cfg.baseline_zero_offset =
      get_bool_or(side, "weights sidecar", "baseline_zero_offset", false);
  cfg.num_queries = static_cast<int>(get_int(side, "weights sidecar", "num_queries"));
  cfg.query_position_scale = get_number_or(side, "weights sidecar",
                                           "query_position_scale",
                                           cfg.query_position_scale);
  const int table_rows =
      static_cast<int>(get_int(side, "weights sidecar", "table_rows"));

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("decoder weights: cannot open '" + path + "'");
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0)
    throw DataError("decoder weights: bad magic in '" + path + "'");

  std::map<std::string, MatX> tensors;
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count && in; ++i) {
    const std::uint32_t name_len = get_u32(in);
    if (name_len > 4096) throw DataError("decoder weights: corrupt tensor name");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (!in || rows > (1u << 24) || cols > (1u << 24))
      throw DataError("decoder weights: corrupt tensor header");
    MatX m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = get_f64(in);
    tensors.emplace(std::move(name), std::move(m));
  }
  if (!in) throw DataError("decoder weights: truncated file '" + path + "'");

  DecoderWeights w = shaped(cfg, table_rows);
  w.for_each_tensor([&](const std::string& name, MatX& m) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw DataError("decoder weights: missing tensor '" + name + "'");
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
      throw DataError("decoder weights: tensor '" + name + "' has wrong shape");
    m = it->second;
  });
  w.validate();
  return w;
}

}  // namespace nrdr
