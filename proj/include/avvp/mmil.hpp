#pragma once

#include "avvp/autodiff.hpp"
#include "avvp/han.hpp"

namespace avvp {

/// Index of a modality along the m-axis of T x 2 x C tensors.
enum class Modality : std::size_t { Audio = 0, Visual = 1 };

namespace mmil_param {
inline constexpr const char* kClassifierWeight = "mmil.classifier.weight";
inline constexpr const char* kClassifierBias = "mmil.classifier.bias";
inline constexpr const char* kTemporalWeight = "mmil.temporal.weight";
inline constexpr const char* kTemporalBias = "mmil.temporal.bias";
inline constexpr const char* kAudioVisualWeight = "mmil.audio_visual.weight";
inline constexpr const char* kAudioVisualBias = "mmil.audio_visual.bias";
}  // namespace mmil_param

/// W_tp is normalized over t (axis 0), W_av over m (axis 1). Both T x 2 x C.
struct AttentionTensors {
  Var temporal;
  Var audio_visual;
};

/// Per-modality contributions to the video-level prediction.
struct ModalityParts {
  Var audio;
  Var visual;
};

/// P[t, m, :] = sigmoid(classifier(feature of modality m at t)). One
/// classifier is shared by both modalities. Returns T x 2 x C.
Var segment_probs(const AggregatedFeatures& features, const BoundParameters& params);

/// Logits from the temporal and audio-visual heads, softmaxed over t and m.
AttentionTensors attention_tensors(const AggregatedFeatures& features, const BoundParameters& params);

/// Attentive MMIL pooling: sum over t and m of W_tp * W_av * P. Returns [C].
Var pool_video(Var probs, const AttentionTensors& attention);

/// sum_t (W_tp * P)[t, m, :] for one modality. Returns [C].
Var pool_modality(Var probs, Var temporal, Modality m);

/// sum_t (W_tp * W_av * P)[t, m, :] for each modality. The two parts add up
/// to pool_video bit-for-bit.
ModalityParts decompose(Var probs, const AttentionTensors& attention);

}  // namespace avvp
