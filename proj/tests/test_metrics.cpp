#include <algorithm>
#include <random>

#include "avvp/metrics.hpp"
#include "avvp/pipeline.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace avvp;
using fixtures::random_grid;
using fixtures::to_oracle;

namespace {

// One class, T taken from the string: '1' marks a positive segment.
SegmentGrid column(const std::string& cells) {
  SegmentGrid g(cells.size(), 1);
  for (std::size_t t = 0; t < cells.size(); ++t) g.set(t, 0, cells[t] == '1');
  return g;
}

SegmentLabels random_labels(std::size_t T, std::size_t C, std::mt19937_64& rng, double density) {
  return {random_grid(T, C, rng, density), random_grid(T, C, rng, density)};
}

void check_report_equals(const EvalReport& r, double value) {
  for (const LevelScores* s : {&r.segment, &r.event}) {
    CHECK(s->audio == value);
    CHECK(s->visual == value);
    CHECK(s->audio_visual == value);
    CHECK(s->ty_at_av == value);
    CHECK(s->ev_at_av == value);
  }
}

}  // namespace

TEST_CASE("binarize") {
  CHECK(binarize(Tensor::full({3, 2, 4}, 0.5)).audio.count() == 12);
  CHECK(binarize(Tensor::full({3, 2, 4}, 0.5)).visual.count() == 12);
  CHECK(binarize(Tensor::full({3, 2, 4}, 0.998), 0.999).audio.count() == 0);

  std::mt19937_64 rng(1);
  const Tensor p = fixtures::random_tensor({6, 2, 5}, rng, 0, 1);
  for (double theta : {0.1, 0.5, 0.73}) {
    const auto out = binarize(p, theta);
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t c = 0; c < 5; ++c) {
        CHECK(out.audio.at(t, c) == (p(t, 0, c) >= theta));
        CHECK(out.visual.at(t, c) == (p(t, 1, c) >= theta));
      }
    }
  }
  CHECK_THROWS_AS(binarize(Tensor({3, 4})), DimensionError);
}

TEST_CASE("av_combine") {
  CHECK(av_combine(column("10"), column("11")) == column("10"));
  CHECK(av_combine(column("1010"), column("0101")).count() == 0);
  std::mt19937_64 rng(2);
  const SegmentGrid g = random_grid(7, 3, rng, 0.5);
  CHECK(av_combine(g, g) == g);
  CHECK_THROWS_AS(av_combine(column("10"), column("100")), DimensionError);
}

TEST_CASE("segment_f1") {
  std::mt19937_64 rng(3);
  const SegmentGrid g = random_grid(10, 4, rng, 0.4);
  REQUIRE(g.count() > 0);
  CHECK(segment_f1({g}, {g}) == 1.0);
  CHECK(segment_f1({SegmentGrid(10, 4)}, {g}) == 0.0);
  CHECK(segment_f1({column("1100")}, {column("1010")}) == 0.5);
  CHECK(segment_f1({column("0000")}, {column("0000")}) == 1.0);
}

TEST_CASE("extract_events") {
  const auto spans = extract_events(column("1101"));
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].start == 0);
  CHECK(spans[0].end == 1);
  CHECK(spans[1].start == 3);
  CHECK(spans[1].end == 3);
  CHECK(extract_events(column("0000")).empty());
  const auto all = extract_events(column("1111111111"));
  REQUIRE(all.size() == 1);
  CHECK(all[0].start == 0);
  CHECK(all[0].end == 9);
  CHECK(all[0].length() == 10);

  SUBCASE("ordered by class then start, runs maximal") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const SegmentGrid g = random_grid(12, 4, rng, 0.5);
      const auto s = extract_events(g, EventModality::Visual);
      for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].modality == EventModality::Visual);
        CHECK(s[i].start <= s[i].end);
        if (s[i].start > 0) CHECK_FALSE(g.at(s[i].start - 1, s[i].cls));
        if (s[i].end + 1 < 12) CHECK_FALSE(g.at(s[i].end + 1, s[i].cls));
        if (i > 0) {
          CHECK((s[i - 1].cls < s[i].cls || (s[i - 1].cls == s[i].cls && s[i - 1].end + 1 < s[i].start)));
        }
      }
    }
  }
}

TEST_CASE("rasterize inverts extract_events") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const SegmentGrid g = random_grid(1 + trial % 15, 1 + trial % 5, rng, 0.45);
    const auto spans = extract_events(g);
    CHECK(rasterize(spans, g.segments(), g.classes()) == g);
    CHECK(extract_events(rasterize(spans, g.segments(), g.classes())) == spans);
  }
  CHECK_THROWS_AS(rasterize({EventSpan{0, 2, 5}}, 4, 1), DimensionError);
}

TEST_CASE("event_f1") {
  CHECK(span_iou({0, 0, 1}, {0, 0, 2}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(event_f1({column("1100")}, {column("1110")}) == 1.0);
  CHECK(span_iou({0, 0, 0}, {0, 0, 3}) == 0.25);
  CHECK(event_f1({column("1000")}, {column("1111")}) == 0.0);
  const auto c = event_counts(column("1000"), column("1111"));
  CHECK(c.tp == 0);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(event_f1({column("1101101")}, {column("1101101")}) == 1.0);
  CHECK(event_f1({column("000")}, {column("000")}) == 1.0);
  CHECK_THROWS_AS(event_f1({column("1")}, {column("1")}, 0.0), ContractError);
  CHECK_THROWS_AS(event_f1({column("1")}, {column("1")}, 1.5), ContractError);

  SUBCASE("threshold 1.0 counts exact matches only") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const SegmentGrid p = random_grid(10, 3, rng, 0.5), g = random_grid(10, 3, rng, 0.5);
      const auto ps = extract_events(p), gs = extract_events(g);
      std::size_t exact = 0;
      for (const auto& s : ps) exact += std::count(gs.begin(), gs.end(), s);
      const Counts k = event_counts(p, g, 1.0);
      CHECK(k.tp == exact);
      CHECK(k.fp == ps.size() - exact);
      CHECK(k.fn == gs.size() - exact);
    }
  }
}

TEST_CASE("ty_at_av") {
  CHECK(ty_at_av(0.605, 0.549, 0.505) == doctest::Approx(0.553).epsilon(1e-12));
  CHECK(ty_at_av(1, 1, 1) == 1.0);
  CHECK(ty_at_av(0.601, 0.529, 0.489) == doctest::Approx(0.5397).epsilon(1e-3));
  CHECK(ty_at_av(0.601, 0.529, 0.489) * 100 == doctest::Approx(54.0).epsilon(1e-3));
}

TEST_CASE("ev_at_av") {
  std::mt19937_64 rng(7);
  const SegmentLabels gt{random_grid(8, 3, rng, 0.5), random_grid(8, 3, rng, 0.5)};
  REQUIRE(gt.audio.count() > 0);
  for (Level level : {Level::Segment, Level::Event}) {
    CHECK(ev_at_av({gt}, {gt}, level) == 1.0);
    CHECK(ev_at_av({SegmentLabels{SegmentGrid(3, 2), SegmentGrid(3, 2)}},
                   {SegmentLabels{SegmentGrid(3, 2), SegmentGrid(3, 2)}}, level) == 1.0);
  }
  // Audio perfect, visual silent, k positives on each side.
  const SegmentLabels truth{column("1101"), column("0111")};
  const SegmentLabels pred{column("1101"), column("0000")};
  CHECK(ev_at_av({pred}, {truth}, Level::Segment) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const SegmentLabels truth_ev{column("1101"), column("1011")};
  CHECK(ev_at_av({pred}, {truth_ev}, Level::Event) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("evaluate") {
  std::mt19937_64 rng(8);
  std::vector<SegmentLabels> gt;
  for (int i = 0; i < 4; ++i) gt.push_back(random_labels(10, 5, rng, 0.4));

  SUBCASE("perfect prediction") { check_report_equals(evaluate(gt, gt), 1.0); }
  SUBCASE("all-zero prediction") {
    std::vector<SegmentLabels> zeros(4, SegmentLabels{SegmentGrid(10, 5), SegmentGrid(10, 5)});
    check_report_equals(evaluate(zeros, gt), 0.0);
  }
  SUBCASE("video count mismatch") { CHECK_THROWS_AS(evaluate({gt[0]}, gt), DimensionError); }
  SUBCASE("scores lie in [0, 1], deterministic") {
    std::vector<SegmentLabels> pred;
    for (int i = 0; i < 4; ++i) pred.push_back(random_labels(10, 5, rng, 0.4));
    const EvalReport r = evaluate(pred, gt);
    CHECK(r.videos == 4);
    for (const LevelScores* s : {&r.segment, &r.event}) {
      for (double x : {s->audio, s->visual, s->audio_visual, s->ty_at_av, s->ev_at_av}) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
      }
    }
    CHECK(report_to_json(r) == report_to_json(evaluate(pred, gt)));
    CHECK(report_to_table(r).find("Audio-Visual") != std::string::npos);
  }
}

TEST_CASE("evaluate agrees with the brute-force oracle") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t videos = 1 + trial % 4, T = 1 + trial % 11, C = 1 + trial % 4;
    const double density = 0.15 + 0.1 * (trial % 6);
    std::vector<SegmentLabels> pred, gt;
    for (std::size_t i = 0; i < videos; ++i) {
      pred.push_back(random_labels(T, C, rng, density));
      gt.push_back(random_labels(T, C, rng, density));
    }
    const auto op = to_oracle(pred), og = to_oracle(gt);
    const EvalReport r = evaluate(pred, gt);
    using oracle::Kind;
    CHECK(r.segment.audio == doctest::Approx(oracle::segment_f(op, og, Kind::Audio)).epsilon(1e-12));
    CHECK(r.segment.visual == doctest::Approx(oracle::segment_f(op, og, Kind::Visual)).epsilon(1e-12));
    CHECK(r.segment.audio_visual == doctest::Approx(oracle::segment_f(op, og, Kind::AudioVisual)).epsilon(1e-12));
    CHECK(r.segment.ev_at_av == doctest::Approx(oracle::pooled_segment_f(op, og)).epsilon(1e-12));
    CHECK(r.event.audio == doctest::Approx(oracle::event_f(op, og, Kind::Audio)).epsilon(1e-12));
    CHECK(r.event.visual == doctest::Approx(oracle::event_f(op, og, Kind::Visual)).epsilon(1e-12));
    CHECK(r.event.audio_visual == doctest::Approx(oracle::event_f(op, og, Kind::AudioVisual)).epsilon(1e-12));
    CHECK(r.event.ev_at_av == doctest::Approx(oracle::pooled_event_f(op, og)).epsilon(1e-12));
    CHECK(r.event.ty_at_av ==
          doctest::Approx(oracle::type_average(r.event.audio, r.event.visual, r.event.audio_visual)).epsilon(1e-15));
  }
}

TEST_CASE("F is symmetric in prediction and annotation") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const SegmentGrid a = random_grid(9, 3, rng, 0.4), b = random_grid(9, 3, rng, 0.4);
    CHECK(segment_f1({a}, {b}) == segment_f1({b}, {a}));
    CHECK(event_f1({a}, {b}) == event_f1({b}, {a}));
  }
}

TEST_CASE("segment_f1 ignores video order") {
  std::mt19937_64 rng(11);
  std::vector<SegmentGrid> pred, gt;
  for (int i = 0; i < 6; ++i) {
    pred.push_back(random_grid(8, 3, rng, 0.4));
    gt.push_back(random_grid(8, 3, rng, 0.4));
  }
  const double base = segment_f1(pred, gt);
  std::vector<std::size_t> order{5, 2, 0, 4, 1, 3};
  std::vector<SegmentGrid> p2, g2;
  for (auto i : order) {
    p2.push_back(pred[i]);
    g2.push_back(gt[i]);
  }
  CHECK(segment_f1(p2, g2) == base);
  CHECK(event_f1(p2, g2) == event_f1(pred, gt));
}

TEST_CASE("evaluate_model") {
  std::mt19937_64 rng(12);
  std::vector<VideoRecord> videos;
  for (int i = 0; i < 3; ++i) {
    videos.push_back(fixtures::oracle_record("v" + std::to_string(i), random_labels(10, 4, rng, 0.4)));
  }
  const auto cfg = fixtures::oracle_model_config(4);
  const auto params = fixtures::oracle_model_params(4);

  SUBCASE("a model that decodes its input scores 1 everywhere") {
    check_report_equals(evaluate_model(params, cfg, videos), 1.0);
  }
  SUBCASE("missing annotations name the videos") {
    videos[0].segment_gt.reset();
    videos[2].segment_gt.reset();
    try {
      evaluate_model(params, cfg, videos);
      FAIL("expected MissingAnnotationError");
    } catch (const MissingAnnotationError& e) {
      CHECK(e.video_ids() == std::vector<std::string>{"v0", "v2"});
      CHECK(std::string(e.what()).find("v2") != std::string::npos);
    }
  }
}
