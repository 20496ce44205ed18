#pragma once

#include <array>
#include <string>
#include <string_view>

#include "avvp/autodiff.hpp"

namespace avvp {

/// How one modality's aggregated feature is formed.
enum class ModalityMode {
  SelfOnly,       ///< f + g_sa(f, F)
  SelfPlusCross,  ///< f + g_sa(f, F) + g_ca(f, F_other)
};

/// One of the four feature-aggregation variants. (SelfPlusCross, SelfPlusCross)
/// is the original hybrid attention network.
struct HanVariant {
  ModalityMode audio = ModalityMode::SelfPlusCross;
  ModalityMode visual = ModalityMode::SelfPlusCross;

  /// "AcrossVcross", "AcrossVself", "AselfVcross" or "AselfVself".
  std::string name() const;
  /// Inverse of name(); throws std::invalid_argument listing the valid names.
  static HanVariant parse(std::string_view name);
  static std::array<HanVariant, 4> all();

  bool operator==(const HanVariant&) const = default;
};

namespace han_param {
inline constexpr const char* kAudioWeight = "han.audio_proj.weight";
inline constexpr const char* kAudioBias = "han.audio_proj.bias";
inline constexpr const char* kVisualWeight = "han.visual_proj.weight";
inline constexpr const char* kVisualBias = "han.visual_proj.bias";
}  // namespace han_param

/// Sequences projected to the common model dimension, both T x d.
struct ProjectedFeatures {
  Var audio;
  Var visual;
};

/// Aggregated sequences, both T x d.
struct AggregatedFeatures {
  Var audio;
  Var visual;
};

/// Per-time-step affine maps f_a W_a + b_a and f_v W_v + b_v into the common
/// dimension. Throws DimensionError when a feature width does not match its
/// projection.
ProjectedFeatures project(Var audio, Var visual, const BoundParameters& params);

/// Scaled dot-product attention of every query row over `sequence`:
/// softmax(Q S^T / sqrt(d), over rows of S) S. Q is n x d, S is T x d.
Var attend(Var queries, Var sequence);

/// g_sa(q, F) for a single query vector of length d.
Var self_attend(Var query, Var sequence);
/// g_ca(q, F_other); same mechanics as self_attend over the other modality.
Var cross_attend(Var query, Var other_sequence);

/// Residual + self-attention, plus cross-attention for each modality whose
/// mode is SelfPlusCross. Inputs are the projected T x d sequences.
AggregatedFeatures aggregate(Var audio, Var visual, HanVariant variant);

}  // namespace avvp
