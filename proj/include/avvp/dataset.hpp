#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "avvp/metrics.hpp"
#include "avvp/tensor.hpp"

namespace avvp {

/// Thrown for unreadable or inconsistent data: bad files, dimension
/// mismatches, out-of-range labels. The message names the offending item.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VideoRecord {
  std::string id;
  Tensor audio;   ///< T x d_a
  Tensor visual;  ///< T x d_v
  Tensor label;   ///< multi-hot [C]
  std::optional<SegmentLabels> segment_gt;
  std::string split;  ///< "train", "val", "test" or empty
};

/// Throws DataError when T differs between modalities or, with annotations
/// present, when the label is not the OR of the audio and visual grids.
void validate_record(const VideoRecord& record);

/// Multi-hot label implied by segment annotations.
Tensor label_from_segments(const SegmentLabels& gt);

struct DatasetInfo {
  std::string name;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::size_t audio_dim = 0;
  std::size_t visual_dim = 0;
  /// Per-class planted signals of synthetic datasets: C x d_a and C x d_v.
  std::optional<Tensor> audio_signals;
  std::optional<Tensor> visual_signals;
};

struct Dataset {
  DatasetInfo info;
  std::vector<VideoRecord> videos;
};

// ------------------------------------------------------------ feature files
//
// Layout: "AVVP", u32 version, u32 T, u32 d, then T*d little-endian float32
// values in row-major order.

inline constexpr std::uint32_t kFeatureFormatVersion = 1;

void write_features(const std::filesystem::path& path, const Tensor& features);
/// Throws DataError naming the file on a bad header, short read or
/// non-float32-representable input to write_features.
Tensor read_features(const std::filesystem::path& path);

/// Rounds every entry to the nearest float32 so feature files round-trip bit-exactly.
Tensor round_to_float32(Tensor t);

// ------------------------------------------------------------ manifests

/// Writes feature files under `dir` and `dir/manifest.json` referencing them.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Loads a manifest and every feature file it references, checking
/// dimensions and label ranges.
Dataset load(const std::filesystem::path& manifest_path);

/// Records of one split tag.
std::vector<VideoRecord> select_split(const std::vector<VideoRecord>& videos, const std::string& split);

// ------------------------------------------------------------ synthetic data

struct SynthConfig {
  std::size_t num_videos = 280;
  std::size_t segments = 10;
  std::size_t num_classes = 8;
  std::size_t audio_dim = 16;
  std::size_t visual_dim = 16;
  double audio_signal_scale = 1.0;
  double visual_signal_scale = 1.0;
  double noise = 0.5;
  double p_audio_only = 0.3;
  double p_visual_only = 0.2;
  double p_audio_visual = 0.5;
  std::size_t min_events = 1;
  std::size_t max_events = 3;
  std::size_t min_event_length = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Kind of a planted event.
enum class EventKind { AudioOnly, VisualOnly, AudioVisual };

/// Plants class signals over sampled intervals on top of isotropic noise.
/// Every video carries full segment annotations.
Dataset synth_generate(const SynthConfig& cfg);

struct Splits {
  std::vector<VideoRecord> train;
  std::vector<VideoRecord> val;
  std::vector<VideoRecord> test;
};

struct SplitFractions {
  double train = 200.0 / 280.0;
  double val = 40.0 / 280.0;
  double test = 40.0 / 280.0;
};

/// Seeded shuffle into disjoint train/val/test sets sized by rounding
/// fractions (test takes the remainder). Train records lose their segment
/// annotations. Each record's split tag is set.
Splits split(std::vector<VideoRecord> videos, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace avvp
