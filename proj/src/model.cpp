#include "avvp/model.hpp"

#include <cmath>
#include <random>

namespace avvp {

void ModelConfig::validate() const {
  if (audio_dim == 0 || visual_dim == 0 || model_dim == 0 || num_classes == 0) {
    throw ContractError("model dimensions must be positive (audio " + std::to_string(audio_dim) + ", visual " +
                        std::to_string(visual_dim) + ", model " + std::to_string(model_dim) + ", classes " +
                        std::to_string(num_classes) + ")");
  }
}

ParameterSet init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParameterSet params;
  // Insertion order fixes the draw order, so keep it stable.
  auto layer = [&](const char* weight, const char* bias, std::size_t fan_in, std::size_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w({fan_in, fan_out});
    for (auto& x : w.data()) x = dist(rng);
    Tensor b({fan_out});
    for (auto& x : b.data()) x = dist(rng);
    params.add(weight, std::move(w));
    params.add(bias, std::move(b));
  };
  const std::size_t d = config.model_dim;
  const std::size_t c = config.num_classes;
  layer(han_param::kAudioWeight, han_param::kAudioBias, config.audio_dim, d);
  layer(han_param::kVisualWeight, han_param::kVisualBias, config.visual_dim, d);
  layer(mmil_param::kClassifierWeight, mmil_param::kClassifierBias, d, c);
  layer(mmil_param::kTemporalWeight, mmil_param::kTemporalBias, d, c);
  layer(mmil_param::kAudioVisualWeight, mmil_param::kAudioVisualBias, d, c);
  return params;
}

ModelOutputs forward(const BoundParameters& params, const ModelConfig& config, Var audio, Var visual) {
  ModelOutputs out;
  out.projected = project(audio, visual, params);
  out.features = aggregate(out.projected.audio, out.projected.visual, config.variant);
  out.probs = segment_probs(out.features, params);
  out.attention = attention_tensors(out.features, params);
  out.video = pool_video(out.probs, out.attention);
  out.audio = pool_modality(out.probs, out.attention.temporal, Modality::Audio);
  out.visual = pool_modality(out.probs, out.attention.temporal, Modality::Visual);
  return out;
}

Inference infer(const ParameterSet& params, const ModelConfig& config, const Tensor& audio, const Tensor& visual) {
  Graph g;
  BoundParameters bound(g, params);
  const ModelOutputs out = forward(bound, config, g.constant(audio), g.constant(visual));
  return {out.probs.value(),  out.attention.temporal.value(), out.attention.audio_visual.value(),
          out.video.value(),  out.audio.value(),              out.visual.value()};
}

}  // namespace avvp
