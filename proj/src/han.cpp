#include "avvp/han.hpp"

#include <cmath>
#include <stdexcept>

namespace avvp {

std::string HanVariant::name() const {
  std::string out = audio == ModalityMode::SelfPlusCross ? "Across" : "Aself";
  out += visual == ModalityMode::SelfPlusCross ? "Vcross" : "Vself";
  return out;
}

HanVariant HanVariant::parse(std::string_view name) {
  for (const auto& v : all()) {
    if (v.name() == name) return v;
  }
  throw std::invalid_argument("unknown HAN variant '" + std::string(name) +
                              "'; expected one of AcrossVcross, AcrossVself, AselfVcross, AselfVself");
}

std::array<HanVariant, 4> HanVariant::all() {
  using M = ModalityMode;
  return {HanVariant{M::SelfPlusCross, M::SelfPlusCross}, HanVariant{M::SelfPlusCross, M::SelfOnly},
          HanVariant{M::SelfOnly, M::SelfPlusCross}, HanVariant{M::SelfOnly, M::SelfOnly}};
}

namespace {

Var affine(Var x, Var weight, Var bias, const char* what) {
  if (x.value().rank() != 2 || x.value().dim(1) != weight.value().dim(0)) {
    throw DimensionError(std::string(what) + " features " + shape_string(x.shape()) +
                         " do not match projection weight " + shape_string(weight.shape()));
  }
  return add_rows(matmul(x, weight), bias);
}

Var as_row(Var query) {
  if (query.value().rank() == 1) return reshape(query, {1, query.value().dim(0)});
  return query;
}

}  // namespace

ProjectedFeatures project(Var audio, Var visual, const BoundParameters& params) {
  if (audio.value().rank() != 2 || visual.value().rank() != 2 || audio.value().dim(0) != visual.value().dim(0)) {
    throw DimensionError("audio " + shape_string(audio.shape()) + " and visual " + shape_string(visual.shape()) +
                         " must be T x d sequences of equal length");
  }
  return {affine(audio, params[han_param::kAudioWeight], params[han_param::kAudioBias], "audio"),
          affine(visual, params[han_param::kVisualWeight], params[han_param::kVisualBias], "visual")};
}

Var attend(Var queries, Var sequence) {
  const std::size_t d = sequence.value().dim(1);
  if (queries.value().dim(1) != d) {
    throw DimensionError("attention query " + shape_string(queries.shape()) + " and sequence " +
                         shape_string(sequence.shape()) + " differ in width");
  }
  Var scores = scale(matmul(queries, transpose(sequence)), 1.0 / std::sqrt(static_cast<double>(d)));
  return matmul(softmax(scores, 1), sequence);
}

Var self_attend(Var query, Var sequence) {
  Var out = attend(as_row(query), sequence);
  return reshape(out, {out.value().dim(1)});
}

Var cross_attend(Var query, Var other_sequence) { return self_attend(query, other_sequence); }

AggregatedFeatures aggregate(Var audio, Var visual, HanVariant variant) {
  if (audio.shape() != visual.shape()) {
    throw DimensionError("aggregate: audio " + shape_string(audio.shape()) + " and visual " +
                         shape_string(visual.shape()) + " must share T and d");
  }
  Var a = add(audio, attend(audio, audio));
  if (variant.audio == ModalityMode::SelfPlusCross) a = add(a, attend(audio, visual));
  Var v = add(visual, attend(visual, visual));
  if (variant.visual == ModalityMode::SelfPlusCross) v = add(v, attend(visual, audio));
  return {a, v};
}

}  // namespace avvp
