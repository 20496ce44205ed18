#include "avvp/objectives.hpp"

#include <cmath>

namespace avvp {

std::string to_string(SmoothingMode mode) {
  switch (mode) {
    case SmoothingMode::NoLS:
      return "NoLS";
    case SmoothingMode::LSA:
      return "LSA";
    case SmoothingMode::LSV:
      return "LSV";
    case SmoothingMode::LSAV:
      return "LSAV";
  }
  return "?";
}

SmoothingMode parse_smoothing_mode(std::string_view name) {
  for (auto m : {SmoothingMode::NoLS, SmoothingMode::LSA, SmoothingMode::LSV, SmoothingMode::LSAV}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown smoothing mode '" + std::string(name) +
                              "'; expected one of NoLS, LSA, LSV, LSAV");
}

std::string to_string(BceForm form) { return form == BceForm::TwoTerm ? "two-term" : "positive-only"; }

BceForm parse_bce_form(std::string_view name) {
  if (name == "two-term") return BceForm::TwoTerm;
  if (name == "positive-only") return BceForm::PositiveOnly;
  throw std::invalid_argument("unknown BCE form '" + std::string(name) + "'; expected two-term or positive-only");
}

SmoothingConfig SmoothingConfig::create(SmoothingMode mode, double delta_a, double delta_v,
                                        std::optional<std::size_t> uniform_size) {
  const bool smooth_a = mode == SmoothingMode::LSA || mode == SmoothingMode::LSAV;
  const bool smooth_v = mode == SmoothingMode::LSV || mode == SmoothingMode::LSAV;
  SmoothingConfig cfg{mode, smooth_a ? delta_a : 0.0, smooth_v ? delta_v : 0.0, uniform_size};
  cfg.validate();
  return cfg;
}

void SmoothingConfig::validate() const {
  auto check = [](double delta, const char* name) {
    if (!(delta >= 0.0 && delta < 1.0)) {
      throw ConfigError(std::string(name) + " must lie in [0, 1), got " + std::to_string(delta));
    }
  };
  check(delta_a, "delta_a");
  check(delta_v, "delta_v");
  if (uniform_size && *uniform_size < 2) throw ConfigError("uniform size K must exceed 1");
  const bool smooth_a = mode == SmoothingMode::LSA || mode == SmoothingMode::LSAV;
  const bool smooth_v = mode == SmoothingMode::LSV || mode == SmoothingMode::LSAV;
  if ((!smooth_a && delta_a != 0.0) || (!smooth_v && delta_v != 0.0)) {
    throw ConfigError("smoothing mode " + to_string(mode) + " leaves a modality unsmoothed but its delta is nonzero");
  }
}

std::pair<Tensor, Tensor> smooth_labels(const Tensor& label, const SmoothingConfig& cfg) {
  cfg.validate();
  const double k = static_cast<double>(cfg.uniform_size.value_or(label.size()));
  auto smooth = [&](double delta) {
    if (delta == 0.0) return label;
    Tensor out(label.shape());
    for (std::size_t c = 0; c < label.size(); ++c) out[c] = (1.0 - delta) * label[c] + delta / k;
    return out;
  };
  return {smooth(cfg.delta_a), smooth(cfg.delta_v)};
}

Var bce(Var p, const Tensor& target, BceForm form) {
  if (p.shape() != target.shape()) {
    throw DimensionError("bce: probabilities " + shape_string(p.shape()) + " vs targets " +
                         shape_string(target.shape()));
  }
  for (double y : target.data()) {
    if (!(y >= 0.0 && y <= 1.0)) throw ContractError("bce: targets must lie in [0, 1]");
  }
  Graph& g = *p.graph;
  Var clamped = clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  Var positive = mul(g.constant(target), log(clamped));
  if (form == BceForm::PositiveOnly) return scale(sum(positive), -1.0);

  Tensor complement(target.shape());
  for (std::size_t c = 0; c < target.size(); ++c) complement[c] = 1.0 - target[c];
  Var negative = mul(g.constant(std::move(complement)), log(add_scalar(scale(clamped, -1.0), 1.0)));
  return scale(sum(add(positive, negative)), -1.0);
}

LossValues LossBreakdown::values() const {
  return {wsl.value().item(), audio.value().item(), visual.value().item(), total.value().item()};
}

LossBreakdown total_loss(Var video, Var audio, Var visual, const Tensor& label, const SmoothingConfig& cfg,
                         BceForm form) {
  auto [target_a, target_v] = smooth_labels(label, cfg);
  LossBreakdown out;
  out.wsl = bce(video, label, form);
  out.audio = bce(audio, target_a, form);
  out.visual = bce(visual, target_v, form);
  out.total = add(add(out.wsl, out.audio), out.visual);
  return out;
}

}  // namespace avvp
