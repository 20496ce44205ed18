#include "avvp/pipeline.hpp"

#include <stdexcept>

namespace avvp {

std::vector<SegmentLabels> predict_segments(const ParameterSet& params, const ModelConfig& model,
                                            std::span<const VideoRecord> videos, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("decoding threshold must lie in (0, 1)");
  std::vector<SegmentLabels> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(binarize(infer(params, model, v.audio, v.visual).probs, threshold));
  return out;
}

EvalReport evaluate_model(const ParameterSet& params, const ModelConfig& model, std::span<const VideoRecord> videos,
                          double threshold) {
  std::vector<std::string> missing;
  std::vector<SegmentLabels> gt;
  for (const auto& v : videos) {
    if (v.segment_gt) {
      gt.push_back(*v.segment_gt);
    } else {
      missing.push_back(v.id);
    }
  }
  if (!missing.empty()) throw MissingAnnotationError(std::move(missing));
  return evaluate(predict_segments(params, model, videos, threshold), gt);
}

std::vector<ClassAttention> attention_mass(const ParameterSet& params, const ModelConfig& model,
                                           std::span<const VideoRecord> videos) {
  std::vector<ClassAttention> out(model.num_classes);
  for (std::size_t c = 0; c < out.size(); ++c) out[c].cls = c;
  if (videos.empty()) return out;
  std::size_t cells = 0;
  for (const auto& v : videos) {
    const Tensor w = infer(params, model, v.audio, v.visual).audio_visual;
    for (std::size_t t = 0; t < w.dim(0); ++t) {
      for (std::size_t c = 0; c < out.size(); ++c) {
        out[c].audio += w(t, 0, c);
        out[c].visual += w(t, 1, c);
      }
    }
    cells += w.dim(0);
  }
  for (auto& m : out) {
    m.audio /= static_cast<double>(cells);
    m.visual /= static_cast<double>(cells);
  }
  return out;
}

double mean_audio_mass(const std::vector<ClassAttention>& masses) {
  double s = 0.0;
  for (const auto& m : masses) s += m.audio;
  return masses.empty() ? 0.0 : s / static_cast<double>(masses.size());
}

double mean_visual_mass(const std::vector<ClassAttention>& masses) {
  double s = 0.0;
  for (const auto& m : masses) s += m.visual;
  return masses.empty() ? 0.0 : s / static_cast<double>(masses.size());
}

}  // namespace avvp
