#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "avvp/autodiff.hpp"
#include "avvp/dataset.hpp"
#include "avvp/model.hpp"
#include "avvp/objectives.hpp"

namespace avvp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double lr0 = 3e-4;
  std::size_t lr_decay_every = 10;
  double lr_decay_factor = 0.1;
  std::uint64_t seed = 0;
  HanVariant variant;
  SmoothingConfig smoothing;
  BceForm bce = BceForm::TwoTerm;
  std::size_t model_dim = 64;
  AdamConfig adam;

  void validate() const;
};

/// lr0 * factor^floor(epoch / decay_every).
double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg);

/// First and second moments mirror the parameter shapes.
struct OptimState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::size_t step = 0;

  static OptimState for_parameters(const ParameterSet& params);
};

/// One bias-corrected Adam update of every parameter.
void adam_step(ParameterSet& params, const ParameterSet& grads, OptimState& state, double lr,
               const AdamConfig& adam = {});

/// Per-epoch means over training videos.
struct LossCurves {
  std::vector<double> wsl;
  std::vector<double> audio;
  std::vector<double> visual;
  std::vector<double> total;

  std::size_t epochs() const { return wsl.size(); }
  bool operator==(const LossCurves&) const = default;
};

/// Mean of squared elementwise differences; throws std::invalid_argument on length mismatch.
double curve_mse(std::span<const double> a, std::span<const double> b);

struct TrainResult {
  ModelConfig model;
  ParameterSet params;
  LossCurves curves;
};

/// Called after every epoch with the zero-based epoch and that epoch's mean losses.
using EpochCallback = std::function<void(std::size_t epoch, const LossValues& means)>;

/// Mean batch loss of the full objective for a set of videos, on `params.graph()`.
LossBreakdown batch_loss(const BoundParameters& params, const ModelConfig& model,
                         std::span<const VideoRecord* const> batch, const SmoothingConfig& smoothing, BceForm bce);

/// Trains from a seeded initialization. Only features and video labels of
/// `train` are read. Throws std::invalid_argument on an empty set.
TrainResult fit(std::span<const VideoRecord> train, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// ------------------------------------------------------------ checkpoints
//
// Layout, all little-endian: "AVVPCKPT", u32 version, u32 metadata length,
// metadata JSON (model config), u32 tensor count, then per tensor:
// u32 name length, name, u32 rank, rank x u64 dims, f64 data row-major.

struct Checkpoint {
  ModelConfig model;
  ParameterSet params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace avvp
