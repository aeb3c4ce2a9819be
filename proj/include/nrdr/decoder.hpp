#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrdr/geometry.hpp"
#include "nrdr/losses.hpp"
#include "nrdr/rendering.hpp"
#include "nrdr/rfs.hpp"
#include "nrdr/scene.hpp"
#include "nrdr/types.hpp"

namespace nrdr {

enum class DecoderVariant { Tabular, Mlp, TransformerEncoder, NaiveQuery };

const char* to_string(DecoderVariant v);
DecoderVariant decoder_variant_from_string(const std::string& s);

struct DecoderConfig {
  DecoderVariant variant = DecoderVariant::TransformerEncoder;
  int feature_dim = 32;
  int hidden_dim = 32;
  int num_heads = 2;
  int num_layers = 1;
  double max_offset = 1.5;
  bool probabilistic = false;
  // Freeze offsets at zero so emitted points sit exactly on ray return
  // positions (the reference point-transfer behavior).
  bool baseline_zero_offset = false;
  int num_queries = 64;  // NaiveQuery only
  // NaiveQuery predicts absolute positions as scale * tanh(raw); this bounds
  // them to a scene-sized box and keeps them reachable within a short
  // training budget.
  double query_position_scale = 50.0;

  void validate() const;
};

struct AttentionLayerWeights {
  MatX wq, wk, wv, wo;  // feature_dim x feature_dim
  MatX ff_w1, ff_b1;    // hidden_dim x feature_dim, hidden_dim x 1
  MatX ff_w2, ff_b2;    // feature_dim x hidden_dim, feature_dim x 1
};

// All learnable tensors. Which fields are non-empty depends on the variant;
// for_each_tensor visits the active ones in a fixed canonical order (also the
// serialization order).
struct DecoderWeights {
  DecoderConfig config;
  int table_rows = 0;  // Tabular only: ray count the table was built for

  MatX pos_embed;  // feature_dim x 3
  // Tabular: one row per ray: [logit_r, raw offset xyz, log scale xyz]
  MatX table;
  // Mlp trunk
  MatX mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  // TransformerEncoder / NaiveQuery trunk
  std::vector<AttentionLayerWeights> layers;
  MatX queries;  // num_queries x feature_dim (NaiveQuery)
  // Heads
  MatX head_r_w, head_r_b;          // 1 x feature_dim, 1 x 1
  MatX head_off_w, head_off_b;      // 3 x feature_dim, 3 x 1
  MatX head_scale_w, head_scale_b;  // 3 x feature_dim, 3 x 1

  static DecoderWeights init(const DecoderConfig& cfg, int num_rays,
                             std::uint64_t seed);
  DecoderWeights zeros_like() const;
  void validate() const;

  template <typename F>
  void for_each_tensor(F&& f) {
    visit_tensors(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit_tensors(*this, f);
  }

  // Binary container plus a JSON sidecar (path + ".json") holding the config.
  void save(const std::string& path) const;
  static DecoderWeights load(const std::string& path);

 private:
  template <typename Self, typename F>
  static void visit_tensors(Self& self, F& f) {
    if (self.config.variant == DecoderVariant::Tabular) {
      f("table", self.table);
      return;
    }
    f("pos_embed", self.pos_embed);
    if (self.config.variant == DecoderVariant::Mlp) {
      f("mlp_w1", self.mlp_w1);
      f("mlp_b1", self.mlp_b1);
      f("mlp_w2", self.mlp_w2);
      f("mlp_b2", self.mlp_b2);
    } else {
      if (self.config.variant == DecoderVariant::NaiveQuery)
        f("queries", self.queries);
      for (std::size_t l = 0; l < self.layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        auto& layer = self.layers[l];
        f(p + "wq", layer.wq);
        f(p + "wk", layer.wk);
        f(p + "wv", layer.wv);
        f(p + "wo", layer.wo);
        f(p + "ff_w1", layer.ff_w1);
        f(p + "ff_b1", layer.ff_b1);
        f(p + "ff_w2", layer.ff_w2);
        f(p + "ff_b2", layer.ff_b2);
      }
    }
    f("head_r_w", self.head_r_w);
    f("head_r_b", self.head_r_b);
    f("head_off_w", self.head_off_w);
    f("head_off_b", self.head_off_b);
    f("head_scale_w", self.head_scale_w);
    f("head_scale_b", self.head_scale_b);
  }
};

// Intermediate activations kept for backward.
struct ForwardCache {
  bool valid = false;
  MatX features;   // rows x feature_dim, straight from renders
  MatX positions;  // rows x 3, return positions
  MatX fused;      // features + positions * pos_embed^T
  std::vector<int> table_rows;  // Tabular: table row per render

  MatX mlp_pre1, mlp_act1;

  struct LayerCache {
    MatX input;              // query-side input
    MatX q, k, v;            // projected
    std::vector<MatX> probs;  // per-head softmax rows
    MatX attn_concat;        // heads concatenated, before wo
    MatX attn_out;           // after wo, before feed-forward
    MatX ff_pre1, ff_act1;
  };
  std::vector<LayerCache> layers;

  MatX trunk_out;    // rows x feature_dim, head input
  MatX raw_offsets;  // rows x 3, before the tanh squash
};

// fused_i = feature_i + pos_embed * return_position_i
MatX embed_and_fuse(const std::vector<RayRender>& renders,
                    const DecoderWeights& weights);

PredictionParams decode(const std::vector<RayRender>& renders,
                        const DecoderWeights& weights, const DecoderConfig& cfg,
                        ForwardCache* cache = nullptr);

// Gradients of the loss w.r.t. every weight tensor, given the gradients
// w.r.t. the decoder outputs. Requires the cache filled by decode.
DecoderWeights backward(const std::vector<RayRender>& renders,
                        const DecoderWeights& weights, const DecoderConfig& cfg,
                        const ForwardCache& cache,
                        const PredictionGradient& output_grad);

// Detections with existence above the confidence threshold (strictly).
PointCloud emit_deterministic(const PredictionParams& params,
                              const RadarConfig& radar);

MultiBernoulli to_multi_bernoulli(const PredictionParams& params,
                                  const RadarConfig& radar);

// One Multi-Bernoulli sample; requires cfg.probabilistic.
PointCloud emit_probabilistic(const PredictionParams& params,
                              const DecoderConfig& cfg, const RadarConfig& radar,
                              std::uint64_t seed);

struct TrainConfig {
  int iterations = 2000;
  int warmup_steps = 500;
  double lr_max = 1e-3;
  double lr_min = 1e-7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double loss_weight = 2e-2;  // scales loss and gradients each iteration
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate(int iteration) const;  // warmup then cosine decay
};

struct FitResult {
  DecoderWeights weights;
  std::vector<double> loss_curve;  // weighted loss, one entry per iteration
};

// Train a decoder against per-scan truth clouds. Scans are rendered once up
// front and visited round-robin, one per iteration. Deterministic in
// (scene, poses, truths, configs, seed).
FitResult fit(const Scene& scene, const std::vector<SensorPose>& poses,
              const std::vector<PointCloud>& truths, const RadarConfig& radar,
              const OpacityParams& opacity, const DecoderConfig& cfg,
              const TrainConfig& train);

}  // namespace nrdr
