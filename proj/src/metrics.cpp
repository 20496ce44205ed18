#include "avvp/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace avvp {

SegmentGrid::SegmentGrid(std::size_t segments, std::size_t classes)
    : segments_(segments), classes_(classes), cells_(segments * classes, 0) {}

std::size_t SegmentGrid::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

double Counts::f1() const {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

namespace {

void require_same_grid(const SegmentGrid& a, const SegmentGrid& b, const char* op) {
  if (a.segments() != b.segments() || a.classes() != b.classes()) {
    throw DimensionError(std::string(op) + ": grid " + std::to_string(a.segments()) + "x" +
                         std::to_string(a.classes()) + " vs " + std::to_string(b.segments()) + "x" +
                         std::to_string(b.classes()));
  }
}

void require_aligned(std::size_t pred, std::size_t gt) {
  if (pred != gt) {
    throw DimensionError("prediction set has " + std::to_string(pred) + " videos, annotations have " +
                         std::to_string(gt));
  }
}

}  // namespace

SegmentLabels binarize(const Tensor& probs, double threshold) {
  if (probs.rank() != 3 || probs.dim(1) != 2) {
    throw DimensionError("binarize expects T x 2 x C probabilities, got " + shape_string(probs.shape()));
  }
  const std::size_t t_len = probs.dim(0), classes = probs.dim(2);
  SegmentLabels out{SegmentGrid(t_len, classes), SegmentGrid(t_len, classes)};
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < classes; ++c) {
      out.audio.set(t, c, probs(t, 0, c) >= threshold);
      out.visual.set(t, c, probs(t, 1, c) >= threshold);
    }
  }
  return out;
}

SegmentGrid av_combine(const SegmentGrid& audio, const SegmentGrid& visual) {
  require_same_grid(audio, visual, "av_combine");
  SegmentGrid out(audio.segments(), audio.classes());
  for (std::size_t t = 0; t < audio.segments(); ++t)
    for (std::size_t c = 0; c < audio.classes(); ++c) out.set(t, c, audio.at(t, c) && visual.at(t, c));
  return out;
}

std::vector<EventSpan> extract_events(const SegmentGrid& grid, EventModality modality) {
  std::vector<EventSpan> spans;
  for (std::size_t c = 0; c < grid.classes(); ++c) {
    std::size_t t = 0;
    while (t < grid.segments()) {
      if (!grid.at(t, c)) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      while (t + 1 < grid.segments() && grid.at(t + 1, c)) ++t;
      spans.push_back({c, start, t, modality});
      ++t;
    }
  }
  return spans;
}

SegmentGrid rasterize(const std::vector<EventSpan>& spans, std::size_t segments, std::size_t classes) {
  SegmentGrid grid(segments, classes);
  for (const auto& s : spans) {
    if (s.cls >= classes || s.start > s.end || s.end >= segments) {
      throw DimensionError("span outside a " + std::to_string(segments) + "x" + std::to_string(classes) + " grid");
    }
    for (std::size_t t = s.start; t <= s.end; ++t) grid.set(t, s.cls);
  }
  return grid;
}

double span_iou(const EventSpan& a, const EventSpan& b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  const std::size_t inter = hi >= lo ? hi - lo + 1 : 0;
  const std::size_t uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Counts segment_counts(const SegmentGrid& pred, const SegmentGrid& gt) {
  require_same_grid(pred, gt, "segment_counts");
  Counts k;
  for (std::size_t t = 0; t < pred.segments(); ++t) {
    for (std::size_t c = 0; c < pred.classes(); ++c) {
      const bool p = pred.at(t, c), g = gt.at(t, c);
      k.tp += p && g;
      k.fp += p && !g;
      k.fn += !p && g;
    }
  }
  return k;
}

Counts event_counts(const SegmentGrid& pred, const SegmentGrid& gt, double iou_threshold) {
  require_same_grid(pred, gt, "event_counts");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ContractError("IoU threshold must lie in (0, 1]");
  }
  const auto pred_spans = extract_events(pred);
  const auto gt_spans = extract_events(gt);

  struct Candidate {
    double iou;
    std::size_t p;
    std::size_t g;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < pred_spans.size(); ++i) {
    for (std::size_t j = 0; j < gt_spans.size(); ++j) {
      if (pred_spans[i].cls != gt_spans[j].cls) continue;
      const double iou = span_iou(pred_spans[i], gt_spans[j]);
      if (iou >= iou_threshold) candidates.push_back({iou, i, j});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.iou > b.iou; });

  std::vector<bool> pred_used(pred_spans.size(), false), gt_used(gt_spans.size(), false);
  std::size_t matched = 0;
  for (const auto& cand : candidates) {
    if (pred_used[cand.p] || gt_used[cand.g]) continue;
    pred_used[cand.p] = gt_used[cand.g] = true;
    ++matched;
  }
  return {matched, pred_spans.size() - matched, gt_spans.size() - matched};
}

double segment_f1(const std::vector<SegmentGrid>& pred, const std::vector<SegmentGrid>& gt) {
  require_aligned(pred.size(), gt.size());
  Counts total;
  for (std::size_t i = 0; i < pred.size(); ++i) total += segment_counts(pred[i], gt[i]);
  return total.f1();
}

double event_f1(const std::vector<SegmentGrid>& pred, const std::vector<SegmentGrid>& gt, double iou_threshold) {
  require_aligned(pred.size(), gt.size());
  Counts total;
  for (std::size_t i = 0; i < pred.size(); ++i) total += event_counts(pred[i], gt[i], iou_threshold);
  return total.f1();
}

double ty_at_av(double audio_f, double visual_f, double av_f) { return (audio_f + visual_f + av_f) / 3.0; }

double ev_at_av(const std::vector<SegmentLabels>& pred, const std::vector<SegmentLabels>& gt, Level level,
                double iou_threshold) {
  require_aligned(pred.size(), gt.size());
  Counts total;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (level == Level::Segment) {
      total += segment_counts(pred[i].audio, gt[i].audio);
      total += segment_counts(pred[i].visual, gt[i].visual);
    } else {
      total += event_counts(pred[i].audio, gt[i].audio, iou_threshold);
      total += event_counts(pred[i].visual, gt[i].visual, iou_threshold);
    }
  }
  return total.f1();
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

}  // namespace

MissingAnnotationError::MissingAnnotationError(std::vector<std::string> ids)
    : std::runtime_error("evaluation needs segment annotations; missing for: " + join_ids(ids)),
      ids_(std::move(ids)) {}

EvalReport evaluate(const std::vector<SegmentLabels>& pred, const std::vector<SegmentLabels>& gt,
                    double iou_threshold) {
  require_aligned(pred.size(), gt.size());
  Counts seg_a, seg_v, seg_av, ev_a, ev_v, ev_av;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const SegmentGrid pred_av = av_combine(pred[i].audio, pred[i].visual);
    const SegmentGrid gt_av = av_combine(gt[i].audio, gt[i].visual);
    seg_a += segment_counts(pred[i].audio, gt[i].audio);
    seg_v += segment_counts(pred[i].visual, gt[i].visual);
    seg_av += segment_counts(pred_av, gt_av);
    ev_a += event_counts(pred[i].audio, gt[i].audio, iou_threshold);
    ev_v += event_counts(pred[i].visual, gt[i].visual, iou_threshold);
    ev_av += event_counts(pred_av, gt_av, iou_threshold);
  }
  auto level = [](const Counts& a, const Counts& v, const Counts& av) {
    LevelScores s;
    s.audio = a.f1();
    s.visual = v.f1();
    s.audio_visual = av.f1();
    s.ty_at_av = ty_at_av(s.audio, s.visual, s.audio_visual);
    Counts pooled = a;
    pooled += v;
    s.ev_at_av = pooled.f1();
    return s;
  };
  EvalReport report;
  report.segment = level(seg_a, seg_v, seg_av);
  report.event = level(ev_a, ev_v, ev_av);
  report.videos = pred.size();
  return report;
}

std::string report_to_json(const EvalReport& report, int indent) {
  auto level = [](const LevelScores& s) {
    return nlohmann::json{{"audio", s.audio},
                          {"visual", s.visual},
                          {"audio_visual", s.audio_visual},
                          {"ty_at_av", s.ty_at_av},
                          {"ev_at_av", s.ev_at_av}};
  };
  nlohmann::json j{{"videos", report.videos}, {"segment", level(report.segment)}, {"event", level(report.event)}};
  return j.dump(indent);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream os;
  char line[96];
  std::snprintf(line, sizeof line, "%-16s %9s %9s\n", "Event type", "Segment", "Event");
  os << line;
  auto row = [&](const char* name, double seg, double ev) {
    std::snprintf(line, sizeof line, "%-16s %9.1f %9.1f\n", name, 100.0 * seg, 100.0 * ev);
    os << line;
  };
  row("Audio", report.segment.audio, report.event.audio);
  row("Visual", report.segment.visual, report.event.visual);
  row("Audio-Visual", report.segment.audio_visual, report.event.audio_visual);
  row("Ty@AV", report.segment.ty_at_av, report.event.ty_at_av);
  row("Ev@AV", report.segment.ev_at_av, report.event.ev_at_av);
  return os.str();
}

}  // namespace avvp
