#pragma once

#include <span>
#include <vector>

#include "avvp/dataset.hpp"
#include "avvp/metrics.hpp"
#include "avvp/model.hpp"

namespace avvp {

/// Thresholded segment predictions for each video.
std::vector<SegmentLabels> predict_segments(const ParameterSet& params, const ModelConfig& model,
                                            std::span<const VideoRecord> videos,
                                            double threshold = kDefaultThreshold);

/// Runs the model over annotated videos and scores it. Throws
/// MissingAnnotationError listing every video without segment annotations.
EvalReport evaluate_model(const ParameterSet& params, const ModelConfig& model, std::span<const VideoRecord> videos,
                          double threshold = kDefaultThreshold);

/// Mean over videos and segments of W_av[t, audio, c] and W_av[t, visual, c].
struct ClassAttention {
  std::size_t cls = 0;
  double audio = 0.0;
  double visual = 0.0;
};

std::vector<ClassAttention> attention_mass(const ParameterSet& params, const ModelConfig& model,
                                           std::span<const VideoRecord> videos);

/// Mean of the per-class audio (or visual) masses.
double mean_audio_mass(const std::vector<ClassAttention>& masses);
double mean_visual_mass(const std::vector<ClassAttention>& masses);

}  // namespace avvp
