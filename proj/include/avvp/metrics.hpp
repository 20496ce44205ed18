#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "avvp/tensor.hpp"

namespace avvp {

/// Binary T x C occupancy grid for one modality of one video.
class SegmentGrid {
 public:
  SegmentGrid() = default;
  SegmentGrid(std::size_t segments, std::size_t classes);

  std::size_t segments() const noexcept { return segments_; }
  std::size_t classes() const noexcept { return classes_; }

  bool at(std::size_t t, std::size_t c) const { return cells_[t * classes_ + c] != 0; }
  void set(std::size_t t, std::size_t c, bool on = true) { cells_[t * classes_ + c] = on ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const SegmentGrid&) const = default;

 private:
  std::size_t segments_ = 0;
  std::size_t classes_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Ground-truth or predicted segment grids of one video.
struct SegmentLabels {
  SegmentGrid audio;
  SegmentGrid visual;
};

enum class EventModality { Audio, Visual, AudioVisual };

/// Maximal run of positive segments of one class. `start` and `end` are
/// zero-based and inclusive.
struct EventSpan {
  std::size_t cls = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  EventModality modality = EventModality::Audio;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const EventSpan&) const = default;
};

/// Confusion counts that micro-average by summation.
struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  /// 2TP / (2TP + FP + FN); 1 when all counts are zero.
  double f1() const;
};

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr double kDefaultIouThreshold = 0.5;

/// Thresholds a T x 2 x C probability cube: cell is positive iff p >= threshold.
SegmentLabels binarize(const Tensor& probs, double threshold = kDefaultThreshold);

/// Audio-visual occupancy: elementwise AND of the two modalities.
SegmentGrid av_combine(const SegmentGrid& audio, const SegmentGrid& visual);

std::vector<EventSpan> extract_events(const SegmentGrid& grid, EventModality modality = EventModality::Audio);
/// Inverse of extract_events for spans on a T x C grid.
SegmentGrid rasterize(const std::vector<EventSpan>& spans, std::size_t segments, std::size_t classes);

double span_iou(const EventSpan& a, const EventSpan& b);

Counts segment_counts(const SegmentGrid& pred, const SegmentGrid& gt);
/// Per class, greedy one-to-one matching of predicted to ground-truth spans
/// in descending IoU order; a pair matches iff IoU >= threshold.
Counts event_counts(const SegmentGrid& pred, const SegmentGrid& gt, double iou_threshold = kDefaultIouThreshold);

/// Micro-averaged segment-level F over a set of aligned (pred, gt) grids.
double segment_f1(const std::vector<SegmentGrid>& pred, const std::vector<SegmentGrid>& gt);
double event_f1(const std::vector<SegmentGrid>& pred, const std::vector<SegmentGrid>& gt,
                double iou_threshold = kDefaultIouThreshold);

double ty_at_av(double audio_f, double visual_f, double av_f);

enum class Level { Segment, Event };

/// F over the pooled, modality-tagged audio and visual instances of every video.
double ev_at_av(const std::vector<SegmentLabels>& pred, const std::vector<SegmentLabels>& gt, Level level,
                double iou_threshold = kDefaultIouThreshold);

struct LevelScores {
  double audio = 0.0;
  double visual = 0.0;
  double audio_visual = 0.0;
  double ty_at_av = 0.0;
  double ev_at_av = 0.0;
};

struct EvalReport {
  LevelScores segment;
  LevelScores event;
  std::size_t videos = 0;
};

/// Thrown when a video lacks segment annotations.
class MissingAnnotationError : public std::runtime_error {
 public:
  explicit MissingAnnotationError(std::vector<std::string> ids);
  const std::vector<std::string>& video_ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

/// All ten scores for aligned predictions and annotations.
EvalReport evaluate(const std::vector<SegmentLabels>& pred, const std::vector<SegmentLabels>& gt,
                    double iou_threshold = kDefaultIouThreshold);

std::string report_to_json(const EvalReport& report, int indent = 2);
/// Aligned table with one row per event type and segment/event columns, scores x100.
std::string report_to_table(const EvalReport& report);

}  // namespace avvp
