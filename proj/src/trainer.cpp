#include "avvp/trainer.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace avvp {

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(lr0 > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (lr_decay_every == 0) throw std::invalid_argument("lr decay interval must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw std::invalid_argument("lr decay factor must lie in (0, 1]");
  if (model_dim == 0) throw std::invalid_argument("model dimension must be positive");
  smoothing.validate();
}

double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.lr_decay_factor, static_cast<double>(epoch / cfg.lr_decay_every));
}

OptimState OptimState::for_parameters(const ParameterSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParameterSet& params, const ParameterSet& grads, OptimState& state, double lr, const AdamConfig& adam) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(adam.beta1, t);
  const double correction2 = 1.0 - std::pow(adam.beta2, t);
  for (auto& [name, theta] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.first_moment.at(name);
    Tensor& v = state.second_moment.at(name);
    if (g.shape() != theta.shape() || m.shape() != theta.shape() || v.shape() != theta.shape()) {
      throw DimensionError("adam_step: shape mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + adam.epsilon);
    }
  }
}

double curve_mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("curve_mse: lengths differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw std::invalid_argument("curve_mse: empty curves");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

namespace {

struct BatchEval {
  LossBreakdown mean;
  std::vector<LossValues> per_video;
};

BatchEval evaluate_batch(const BoundParameters& params, const ModelConfig& model,
                         std::span<const VideoRecord* const> batch, const SmoothingConfig& smoothing, BceForm bce) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Graph& g = params.graph();
  BatchEval out;
  std::optional<Var> wsl, audio, visual;
  auto accumulate = [](std::optional<Var>& acc, Var x) { acc = acc ? add(*acc, x) : x; };
  for (const VideoRecord* video : batch) {
    const ModelOutputs fwd = forward(params, model, g.constant(video->audio), g.constant(video->visual));
    const LossBreakdown loss = total_loss(fwd.video, fwd.audio, fwd.visual, video->label, smoothing, bce);
    out.per_video.push_back(loss.values());
    accumulate(wsl, loss.wsl);
    accumulate(audio, loss.audio);
    accumulate(visual, loss.visual);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.mean.wsl = scale(*wsl, inv);
  out.mean.audio = scale(*audio, inv);
  out.mean.visual = scale(*visual, inv);
  out.mean.total = add(add(out.mean.wsl, out.mean.audio), out.mean.visual);
  return out;
}

}  // namespace

LossBreakdown batch_loss(const BoundParameters& params, const ModelConfig& model,
                         std::span<const VideoRecord* const> batch, const SmoothingConfig& smoothing, BceForm bce) {
  return evaluate_batch(params, model, batch, smoothing, bce).mean;
}

TrainResult fit(std::span<const VideoRecord> train, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  cfg.validate();

  TrainResult result;
  result.model = ModelConfig{train.front().audio.dim(1), train.front().visual.dim(1), cfg.model_dim,
                             train.front().label.size(), cfg.variant};
  for (const auto& v : train) {
    if (v.audio.dim(1) != result.model.audio_dim || v.visual.dim(1) != result.model.visual_dim ||
        v.label.size() != result.model.num_classes) {
      throw DataError("video " + v.id + ": dimensions differ from the rest of the training set");
    }
  }
  result.params = init_parameters(result.model, cfg.seed);
  OptimState state = OptimState::for_parameters(result.params);

  std::vector<const VideoRecord*> order;
  for (const auto& v : train) order.push_back(&v);
  const double n = static_cast<double>(train.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(epoch + 1)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_at_epoch(epoch, cfg);

    LossValues sums;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::span<const VideoRecord* const> batch(order.data() + begin, end - begin);

      Graph g;
      BoundParameters bound(g, result.params);
      const BatchEval eval = evaluate_batch(bound, result.model, batch, cfg.smoothing, cfg.bce);
      for (const auto& v : eval.per_video) {
        sums.wsl += v.wsl;
        sums.audio += v.audio;
        sums.visual += v.visual;
        sums.total += v.total;
      }
      const ParameterSet grads = g.backward(eval.mean.total).for_parameters(result.params);
      adam_step(result.params, grads, state, lr, cfg.adam);
    }
    const LossValues means{sums.wsl / n, sums.audio / n, sums.visual / n, sums.total / n};
    result.curves.wsl.push_back(means.wsl);
    result.curves.audio.push_back(means.audio);
    result.curves.visual.push_back(means.visual);
    result.curves.total.push_back(means.total);
    if (on_epoch) on_epoch(epoch, means);
  }
  return result;
}

// ------------------------------------------------------------ checkpoints

namespace {

constexpr char kCheckpointMagic[] = "AVVPCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  Reader(std::vector<unsigned char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError(path_ + ": truncated checkpoint");
  }
  std::vector<unsigned char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const ModelConfig& m = checkpoint.model;
  const nlohmann::json meta{{"audio_dim", m.audio_dim},
                            {"visual_dim", m.visual_dim},
                            {"model_dim", m.model_dim},
                            {"num_classes", m.num_classes},
                            {"variant", m.variant.name()}};
  const std::string meta_text = meta.dump();

  std::string bytes(kCheckpointMagic, 8);
  put_le<std::uint32_t>(bytes, kCheckpointVersion);
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(meta_text.size()));
  bytes += meta_text;
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const auto& [name, t] : checkpoint.params) {
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(name.size()));
    bytes += name;
    put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(bytes, d);
    for (double v : t.data()) put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path.string() + ": cannot open for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path.string() + ": cannot open checkpoint");
  Reader r(std::vector<unsigned char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>()),
           path.string());
  if (r.get_string(8) != std::string(kCheckpointMagic, 8)) {
    throw DataError(path.string() + ": bad checkpoint header (expected magic AVVPCKPT)");
  }
  if (const auto version = r.get<std::uint32_t>(); version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  try {
    const auto meta = nlohmann::json::parse(r.get_string(r.get<std::uint32_t>()));
    ck.model.audio_dim = meta.at("audio_dim").get<std::size_t>();
    ck.model.visual_dim = meta.at("visual_dim").get<std::size_t>();
    ck.model.model_dim = meta.at("model_dim").get<std::size_t>();
    ck.model.num_classes = meta.at("num_classes").get<std::size_t>();
    ck.model.variant = HanVariant::parse(meta.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint metadata: " + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string(r.get<std::uint32_t>());
    Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = r.get<std::uint64_t>();
    Tensor t(shape);
    for (auto& v : t.data()) v = std::bit_cast<double>(r.get<std::uint64_t>());
    ck.params.add(name, std::move(t));
  }
  if (!r.done()) throw DataError(path.string() + ": trailing bytes after checkpoint tensors");
  // Every parameter the model needs must be present with the right shape.
  const ParameterSet expected = init_parameters(ck.model, 0);
  for (const auto& [name, t] : expected) {
    if (!ck.params.contains(name) || ck.params.at(name).shape() != t.shape()) {
      throw DataError(path.string() + ": checkpoint lacks parameter '" + name + "' of shape " +
                      shape_string(t.shape()));
    }
  }
  return ck;
}

}  // namespace avvp
