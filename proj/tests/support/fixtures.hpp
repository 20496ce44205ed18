#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "avvp/dataset.hpp"
#include "avvp/metrics.hpp"
#include "avvp/model.hpp"
#include "avvp/tensor.hpp"
#include "metrics_oracle.hpp"

namespace fixtures {

using avvp::Shape;
using avvp::Tensor;

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& x : t.data()) x = u(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("avvp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline avvp::SegmentGrid random_grid(std::size_t T, std::size_t C, std::mt19937_64& rng, double density) {
  std::bernoulli_distribution on(density);
  avvp::SegmentGrid g(T, C);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) g.set(t, c, on(rng));
  return g;
}

inline oracle::Grid to_oracle(const avvp::SegmentGrid& g) {
  oracle::Grid out(g.segments(), std::vector<int>(g.classes(), 0));
  for (std::size_t t = 0; t < g.segments(); ++t)
    for (std::size_t c = 0; c < g.classes(); ++c) out[t][c] = g.at(t, c) ? 1 : 0;
  return out;
}

inline std::vector<oracle::Video> to_oracle(const std::vector<avvp::SegmentLabels>& v) {
  std::vector<oracle::Video> out;
  for (const auto& s : v) out.push_back({to_oracle(s.audio), to_oracle(s.visual)});
  return out;
}

inline Tensor grid_features(const avvp::SegmentGrid& g, double scale) {
  Tensor t({g.segments(), g.classes()});
  for (std::size_t s = 0; s < g.segments(); ++s)
    for (std::size_t c = 0; c < g.classes(); ++c) t(s, c) = g.at(s, c) ? scale : 0.0;
  return t;
}

/// A model that decodes its own input: d = C, identity projections, no
/// cross-attention, classifier I with bias -95. Fed 100 * ground-truth
/// grids it reproduces the grids exactly for T < 20.
inline avvp::ModelConfig oracle_model_config(std::size_t classes) {
  return {classes, classes, classes, classes, avvp::HanVariant::parse("AselfVself")};
}

inline avvp::ParameterSet oracle_model_params(std::size_t classes) {
  const auto cfg = oracle_model_config(classes);
  avvp::ParameterSet p = avvp::init_parameters(cfg, 0);
  for (auto& [name, t] : p) {
    for (auto& x : t.data()) x = 0.0;
  }
  p.at("han.audio_proj.weight") = Tensor::identity(classes);
  p.at("han.visual_proj.weight") = Tensor::identity(classes);
  p.at("mmil.classifier.weight") = Tensor::identity(classes);
  p.at("mmil.classifier.bias") = Tensor::full({classes}, -95.0);
  return p;
}

/// Annotated record whose features are 100 * its ground-truth grids.
inline avvp::VideoRecord oracle_record(const std::string& id, const avvp::SegmentLabels& gt) {
  avvp::VideoRecord v;
  v.id = id;
  v.audio = grid_features(gt.audio, 100.0);
  v.visual = grid_features(gt.visual, 100.0);
  v.label = avvp::label_from_segments(gt);
  v.segment_gt = gt;
  v.split = "test";
  return v;
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace fixtures
