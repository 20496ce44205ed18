#include "avvp/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

namespace avvp {

namespace fs = std::filesystem;
using nlohmann::json;

void validate_record(const VideoRecord& record) {
  if (record.audio.rank() != 2 || record.visual.rank() != 2) {
    throw DataError("video " + record.id + ": features must be T x d matrices");
  }
  if (record.audio.dim(0) != record.visual.dim(0)) {
    throw DataError("video " + record.id + ": audio has " + std::to_string(record.audio.dim(0)) +
                    " segments, visual has " + std::to_string(record.visual.dim(0)));
  }
  for (double y : record.label.data()) {
    if (y != 0.0 && y != 1.0) throw DataError("video " + record.id + ": label entries must be 0 or 1");
  }
  if (!record.segment_gt) return;
  const auto& gt = *record.segment_gt;
  if (gt.audio.segments() != record.audio.dim(0) || gt.visual.segments() != record.audio.dim(0) ||
      gt.audio.classes() != record.label.size() || gt.visual.classes() != record.label.size()) {
    throw DataError("video " + record.id + ": annotation grids do not match T x C");
  }
  if (!label_from_segments(gt).identical(record.label)) {
    throw DataError("video " + record.id + ": label is not the union of its segment annotations");
  }
}

Tensor label_from_segments(const SegmentLabels& gt) {
  Tensor label({gt.audio.classes()});
  for (std::size_t t = 0; t < gt.audio.segments(); ++t)
    for (std::size_t c = 0; c < gt.audio.classes(); ++c)
      if (gt.audio.at(t, c) || gt.visual.at(t, c)) label[c] = 1.0;
  return label;
}

// ------------------------------------------------------------ feature files

namespace {

constexpr std::array<char, 4> kMagic{'A', 'V', 'V', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

Tensor round_to_float32(Tensor t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  return t;
}

void write_features(const fs::path& path, const Tensor& features) {
  if (features.rank() != 2) throw DataError(path.string() + ": features must be a T x d matrix");
  std::string bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, kFeatureFormatVersion);
  put_u32(bytes, static_cast<std::uint32_t>(features.dim(0)));
  put_u32(bytes, static_cast<std::uint32_t>(features.dim(1)));
  for (double v : features.data()) {
    const float f = static_cast<float>(v);
    if (static_cast<double>(f) != v) {
      throw DataError(path.string() + ": value " + std::to_string(v) + " is not representable as float32");
    }
    put_u32(bytes, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path.string() + ": cannot open for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError(path.string() + ": write failed");
}

Tensor read_features(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path.string() + ": cannot open feature file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin(),
                                       [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
    throw DataError(path.string() + ": bad feature file header (expected magic AVVP)");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFeatureFormatVersion) {
    throw DataError(path.string() + ": unsupported feature format version " + std::to_string(version));
  }
  const std::size_t t_len = get_u32(bytes.data() + 8);
  const std::size_t d = get_u32(bytes.data() + 12);
  if (t_len == 0 || d == 0) throw DataError(path.string() + ": empty feature matrix");
  if (bytes.size() != 16 + 4 * t_len * d) {
    throw DataError(path.string() + ": expected " + std::to_string(t_len * d) + " float32 values, file has " +
                    std::to_string((bytes.size() - 16) / 4));
  }
  Tensor out({t_len, d});
  for (std::size_t i = 0; i < t_len * d; ++i) {
    out[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i)));
  }
  return out;
}

// ------------------------------------------------------------ manifests

namespace {

json grid_to_json(const SegmentGrid& grid) {
  json rows = json::array();
  for (std::size_t t = 0; t < grid.segments(); ++t) {
    json row = json::array();
    for (std::size_t c = 0; c < grid.classes(); ++c) row.push_back(grid.at(t, c) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return rows;
}

SegmentGrid grid_from_json(const json& rows, std::size_t classes, const std::string& id) {
  if (!rows.is_array() || rows.empty()) throw DataError("video " + id + ": annotation grid must be a nonempty array");
  SegmentGrid grid(rows.size(), classes);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& row = rows[t];
    if (!row.is_array() || row.size() != classes) {
      throw DataError("video " + id + ": annotation row " + std::to_string(t) + " must have " +
                      std::to_string(classes) + " entries");
    }
    for (std::size_t c = 0; c < classes; ++c) {
      const int v = row[c].get<int>();
      if (v != 0 && v != 1) throw DataError("video " + id + ": annotation entries must be 0 or 1");
      grid.set(t, c, v == 1);
    }
  }
  return grid;
}

json matrix_to_json(const Tensor& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.dim(1); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor matrix_from_json(const json& rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows[0].size() : 0;
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != m) throw DataError("ragged matrix in manifest");
    for (std::size_t j = 0; j < m; ++j) out(i, j) = rows[i][j].get<double>();
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  const auto& info = dataset.info;
  fs::create_directories(dir / "features");
  json j;
  j["format"] = "avvp-manifest";
  j["version"] = 1;
  j["name"] = info.name;
  j["num_classes"] = info.num_classes;
  j["class_names"] = info.class_names;
  j["audio_dim"] = info.audio_dim;
  j["visual_dim"] = info.visual_dim;
  if (info.audio_signals && info.visual_signals) {
    j["class_signals"] = {{"audio", matrix_to_json(*info.audio_signals)},
                          {"visual", matrix_to_json(*info.visual_signals)}};
  }
  json videos = json::array();
  for (const auto& v : dataset.videos) {
    validate_record(v);
    const std::string audio_rel = "features/" + v.id + ".audio.bin";
    const std::string visual_rel = "features/" + v.id + ".visual.bin";
    write_features(dir / audio_rel, v.audio);
    write_features(dir / visual_rel, v.visual);
    json entry{{"id", v.id}, {"split", v.split}, {"audio", audio_rel}, {"visual", visual_rel}};
    json labels = json::array();
    for (std::size_t c = 0; c < v.label.size(); ++c)
      if (v.label[c] == 1.0) labels.push_back(c);
    entry["labels"] = labels;
    if (v.segment_gt) {
      entry["segment_gt"] = {{"audio", grid_to_json(v.segment_gt->audio)},
                             {"visual", grid_to_json(v.segment_gt->visual)}};
    }
    videos.push_back(std::move(entry));
  }
  j["videos"] = std::move(videos);
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw DataError((dir / "manifest.json").string() + ": cannot open for writing");
  os << j.dump(1) << '\n';
}

Dataset load(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw DataError(manifest_path.string() + ": cannot open manifest");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();

  Dataset ds;
  try {
    auto& info = ds.info;
    info.name = j.value("name", std::string{});
    info.num_classes = j.at("num_classes").get<std::size_t>();
    info.class_names = j.at("class_names").get<std::vector<std::string>>();
    info.audio_dim = j.at("audio_dim").get<std::size_t>();
    info.visual_dim = j.at("visual_dim").get<std::size_t>();
    if (info.class_names.size() != info.num_classes) {
      throw DataError(manifest_path.string() + ": class_names has " + std::to_string(info.class_names.size()) +
                      " entries, num_classes is " + std::to_string(info.num_classes));
    }
    if (j.contains("class_signals")) {
      info.audio_signals = matrix_from_json(j["class_signals"].at("audio"));
      info.visual_signals = matrix_from_json(j["class_signals"].at("visual"));
    }
    for (const auto& entry : j.at("videos")) {
      VideoRecord v;
      v.id = entry.at("id").get<std::string>();
      v.split = entry.value("split", std::string{});
      const fs::path audio_path = base / entry.at("audio").get<std::string>();
      const fs::path visual_path = base / entry.at("visual").get<std::string>();
      if (!fs::exists(audio_path)) throw DataError("video " + v.id + ": missing file " + audio_path.string());
      if (!fs::exists(visual_path)) throw DataError("video " + v.id + ": missing file " + visual_path.string());
      v.audio = read_features(audio_path);
      v.visual = read_features(visual_path);
      if (v.audio.dim(1) != info.audio_dim) {
        throw DataError("video " + v.id + ": audio width " + std::to_string(v.audio.dim(1)) +
                        " does not match manifest audio_dim " + std::to_string(info.audio_dim));
      }
      if (v.visual.dim(1) != info.visual_dim) {
        throw DataError("video " + v.id + ": visual width " + std::to_string(v.visual.dim(1)) +
                        " does not match manifest visual_dim " + std::to_string(info.visual_dim));
      }
      v.label = Tensor({info.num_classes});
      for (const auto& idx : entry.at("labels")) {
        const auto c = idx.get<std::size_t>();
        if (c >= info.num_classes) {
          throw DataError("video " + v.id + ": label index " + std::to_string(c) + " >= C = " +
                          std::to_string(info.num_classes));
        }
        v.label[c] = 1.0;
      }
      if (entry.contains("segment_gt")) {
        const auto& gt = entry["segment_gt"];
        v.segment_gt = SegmentLabels{grid_from_json(gt.at("audio"), info.num_classes, v.id),
                                     grid_from_json(gt.at("visual"), info.num_classes, v.id)};
      }
      validate_record(v);
      ds.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  return ds;
}

std::vector<VideoRecord> select_split(const std::vector<VideoRecord>& videos, const std::string& split) {
  std::vector<VideoRecord> out;
  std::copy_if(videos.begin(), videos.end(), std::back_inserter(out),
               [&](const VideoRecord& v) { return v.split == split; });
  return out;
}

// ------------------------------------------------------------ synthetic data

void SynthConfig::validate() const {
  if (num_videos == 0 || segments == 0 || num_classes == 0 || audio_dim == 0 || visual_dim == 0) {
    throw std::invalid_argument("synthetic dataset sizes must be positive");
  }
  for (double p : {p_audio_only, p_visual_only, p_audio_visual}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("event-kind probabilities must lie in [0, 1]");
  }
  if (std::abs(p_audio_only + p_visual_only + p_audio_visual - 1.0) > 1e-9) {
    throw std::invalid_argument("event-kind probabilities must sum to 1");
  }
  if (!(noise >= 0.0)) throw std::invalid_argument("noise scale must be nonnegative");
  if (min_events == 0 || min_events > max_events) {
    throw std::invalid_argument("need 1 <= min_events <= max_events");
  }
  if (min_event_length == 0 || min_event_length > segments) {
    throw std::invalid_argument("need 1 <= min_event_length <= segments");
  }
}

Dataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  Dataset ds;
  auto& info = ds.info;
  info.name = "synthetic";
  info.num_classes = cfg.num_classes;
  info.audio_dim = cfg.audio_dim;
  info.visual_dim = cfg.visual_dim;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) info.class_names.push_back("class_" + std::to_string(c));

  auto signals = [&](std::size_t dim, double scale) {
    Tensor s({cfg.num_classes, dim});
    for (auto& v : s.data()) v = scale * unit(rng);
    return round_to_float32(std::move(s));
  };
  info.audio_signals = signals(cfg.audio_dim, cfg.audio_signal_scale);
  info.visual_signals = signals(cfg.visual_dim, cfg.visual_signal_scale);

  std::discrete_distribution<int> kind_dist({cfg.p_audio_only, cfg.p_visual_only, cfg.p_audio_visual});
  const std::size_t t_len = cfg.segments;
  const std::size_t max_events = std::min(cfg.max_events, cfg.num_classes);
  const std::size_t min_events = std::min(cfg.min_events, max_events);

  for (std::size_t i = 0; i < cfg.num_videos; ++i) {
    VideoRecord v;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%05zu", i);
    v.id = id;
    SegmentLabels gt{SegmentGrid(t_len, cfg.num_classes), SegmentGrid(t_len, cfg.num_classes)};

    std::vector<std::size_t> classes(cfg.num_classes);
    std::iota(classes.begin(), classes.end(), std::size_t{0});
    std::shuffle(classes.begin(), classes.end(), rng);
    const std::size_t n_events = std::uniform_int_distribution<std::size_t>(min_events, max_events)(rng);
    for (std::size_t e = 0; e < n_events; ++e) {
      const std::size_t c = classes[e];
      const auto kind = static_cast<EventKind>(kind_dist(rng));
      const std::size_t len = std::uniform_int_distribution<std::size_t>(cfg.min_event_length, t_len)(rng);
      const std::size_t start = std::uniform_int_distribution<std::size_t>(0, t_len - len)(rng);
      for (std::size_t t = start; t < start + len; ++t) {
        if (kind != EventKind::VisualOnly) gt.audio.set(t, c);
        if (kind != EventKind::AudioOnly) gt.visual.set(t, c);
      }
    }

    auto features = [&](const SegmentGrid& grid, const Tensor& sig, std::size_t dim) {
      Tensor f({t_len, dim});
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t k = 0; k < dim; ++k) {
          double x = cfg.noise > 0.0 ? cfg.noise * unit(rng) : 0.0;
          for (std::size_t c = 0; c < cfg.num_classes; ++c)
            if (grid.at(t, c)) x += sig(c, k);
          f(t, k) = x;
        }
      }
      return round_to_float32(std::move(f));
    };
    v.audio = features(gt.audio, *info.audio_signals, cfg.audio_dim);
    v.visual = features(gt.visual, *info.visual_signals, cfg.visual_dim);
    v.label = label_from_segments(gt);
    v.segment_gt = std::move(gt);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

Splits split(std::vector<VideoRecord> videos, const SplitFractions& f, std::uint64_t seed) {
  for (double x : {f.train, f.val, f.test}) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("split fractions must lie in [0, 1]");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

  const std::size_t n = videos.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n))));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n))));

  Splits out;
  for (std::size_t i = 0; i < n; ++i) {
    VideoRecord& v = videos[order[i]];
    if (i < n_train) {
      v.split = "train";
      v.segment_gt.reset();
      out.train.push_back(std::move(v));
    } else if (i < n_train + n_val) {
      v.split = "val";
      out.val.push_back(std::move(v));
    } else {
      v.split = "test";
      out.test.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace avvp
