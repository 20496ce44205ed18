#include "avvp/mmil.hpp"

#include <array>

namespace avvp {

namespace {

// Applies one affine head to both modalities and stacks the results as T x 2 x C.
Var shared_head(const AggregatedFeatures& features, Var weight, Var bias) {
  std::array<Var, 2> logits{add_rows(matmul(features.audio, weight), bias),
                            add_rows(matmul(features.visual, weight), bias)};
  return stack(logits, 1);
}

void require_cube(Var x, const char* what) {
  if (x.value().rank() != 3 || x.value().dim(1) != 2) {
    throw DimensionError(std::string(what) + " must be T x 2 x C, got " + shape_string(x.shape()));
  }
}

}  // namespace

Var segment_probs(const AggregatedFeatures& features, const BoundParameters& params) {
  return sigmoid(shared_head(features, params[mmil_param::kClassifierWeight], params[mmil_param::kClassifierBias]));
}

AttentionTensors attention_tensors(const AggregatedFeatures& features, const BoundParameters& params) {
  Var tp_logits = shared_head(features, params[mmil_param::kTemporalWeight], params[mmil_param::kTemporalBias]);
  Var av_logits =
      shared_head(features, params[mmil_param::kAudioVisualWeight], params[mmil_param::kAudioVisualBias]);
  return {softmax(tp_logits, 0), softmax(av_logits, 1)};
}

ModalityParts decompose(Var probs, const AttentionTensors& attention) {
  require_cube(probs, "probabilities");
  if (attention.temporal.shape() != probs.shape() || attention.audio_visual.shape() != probs.shape()) {
    throw DimensionError("attention tensors " + shape_string(attention.temporal.shape()) + " / " +
                         shape_string(attention.audio_visual.shape()) + " do not match probabilities " +
                         shape_string(probs.shape()));
  }
  Var per_modality = sum_along_axis(mul(mul(attention.temporal, attention.audio_visual), probs), 0);
  return {select(per_modality, 0, 0), select(per_modality, 0, 1)};
}

Var pool_video(Var probs, const AttentionTensors& attention) {
  ModalityParts parts = decompose(probs, attention);
  return add(parts.audio, parts.visual);
}

Var pool_modality(Var probs, Var temporal, Modality m) {
  require_cube(probs, "probabilities");
  if (temporal.shape() != probs.shape()) {
    throw DimensionError("temporal attention " + shape_string(temporal.shape()) + " does not match probabilities " +
                         shape_string(probs.shape()));
  }
  return sum_along_axis(select(mul(temporal, probs), 1, static_cast<std::size_t>(m)), 0);
}

}  // namespace avvp
