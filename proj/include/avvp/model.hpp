#pragma once

#include <cstdint>

#include "avvp/autodiff.hpp"
#include "avvp/han.hpp"
#include "avvp/mmil.hpp"

namespace avvp {

struct ModelConfig {
  std::size_t audio_dim = 0;
  std::size_t visual_dim = 0;
  std::size_t model_dim = 64;
  std::size_t num_classes = 0;
  HanVariant variant;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// All parameters, each drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
/// Bias fan-in is the fan-in of its weight.
ParameterSet init_parameters(const ModelConfig& config, std::uint64_t seed);

struct ModelOutputs {
  ProjectedFeatures projected;
  AggregatedFeatures features;
  Var probs;  ///< T x 2 x C
  AttentionTensors attention;
  Var video;   ///< p_wsl, [C]
  Var audio;   ///< p_a, [C]
  Var visual;  ///< p_v, [C]
};

/// Builds the full forward pass for one video on `params.graph()`.
ModelOutputs forward(const BoundParameters& params, const ModelConfig& config, Var audio, Var visual);

/// Forward values of one video, detached from any graph.
struct Inference {
  Tensor probs;
  Tensor temporal;
  Tensor audio_visual;
  Tensor video;
  Tensor audio;
  Tensor visual;
};

Inference infer(const ParameterSet& params, const ModelConfig& config, const Tensor& audio, const Tensor& visual);

}  // namespace avvp
