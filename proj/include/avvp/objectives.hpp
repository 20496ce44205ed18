#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "avvp/autodiff.hpp"

namespace avvp {

/// Which modality-specific targets are label-smoothed.
enum class SmoothingMode { NoLS, LSA, LSV, LSAV };

std::string to_string(SmoothingMode mode);
/// Accepts "NoLS", "LSA", "LSV", "LSAV"; throws std::invalid_argument otherwise.
SmoothingMode parse_smoothing_mode(std::string_view name);

/// Thrown for out-of-range smoothing settings.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Label smoothing settings. Build through create(); the stored delta of a
/// modality the mode does not smooth is always zero.
struct SmoothingConfig {
  SmoothingMode mode = SmoothingMode::NoLS;
  double delta_a = 0.0;
  double delta_v = 0.0;
  /// Size of the uniform component; unset means the number of classes.
  std::optional<std::size_t> uniform_size;

  static constexpr double kDefaultDelta = 0.1;

  static SmoothingConfig create(SmoothingMode mode, double delta_a = kDefaultDelta, double delta_v = kDefaultDelta,
                                std::optional<std::size_t> uniform_size = std::nullopt);
  void validate() const;
};

/// Form of the cross-entropy applied to video-level probabilities.
enum class BceForm {
  TwoTerm,       ///< -sum y log p + (1 - y) log(1 - p)
  PositiveOnly,  ///< -sum y log p
};

std::string to_string(BceForm form);
BceForm parse_bce_form(std::string_view name);

inline constexpr double kProbabilityClamp = 1e-7;

/// Smoothed targets (y_a, y_v) for a multi-hot video label:
/// y_m = (1 - delta_m) y + delta_m / K.
std::pair<Tensor, Tensor> smooth_labels(const Tensor& label, const SmoothingConfig& cfg);

/// Binary cross-entropy summed over classes. `p` is clamped to
/// [1e-7, 1 - 1e-7] first; `target` entries must lie in [0, 1].
Var bce(Var p, const Tensor& target, BceForm form = BceForm::TwoTerm);

struct LossValues {
  double wsl = 0.0;
  double audio = 0.0;
  double visual = 0.0;
  double total = 0.0;
};

struct LossBreakdown {
  Var wsl;
  Var audio;
  Var visual;
  Var total;

  LossValues values() const;
};

/// L = L_wsl + L_a + L_v. L_wsl uses the unsmoothed label, L_a and L_v the
/// smoothed per-modality targets.
LossBreakdown total_loss(Var video, Var audio, Var visual, const Tensor& label, const SmoothingConfig& cfg,
                         BceForm form = BceForm::TwoTerm);

}  // namespace avvp
