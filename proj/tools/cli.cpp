#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "avvp/dataset.hpp"
#include "avvp/pipeline.hpp"
#include "avvp/trainer.hpp"
#include "json.hpp"

namespace avvp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Usage problems detected after flag parsing (bad enum strings, ranges).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string default_data_dir() {
  const char* env = std::getenv(kDataDirEnv);
  return env && *env ? env : "data";
}

fs::path manifest_path(const fs::path& data) { return fs::is_directory(data) ? data / "manifest.json" : data; }

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError(path.string() + ": cannot open for writing");
  os << text;
  if (!os) throw DataError(path.string() + ": write failed");
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::vector<VideoRecord> records_of_split(const Dataset& ds, const std::string& split) {
  if (split == "all") return ds.videos;
  auto out = select_split(ds.videos, split);
  if (out.empty()) throw DataError("dataset has no videos in split '" + split + "'");
  return out;
}

void check_compatible(const ModelConfig& m, const DatasetInfo& info) {
  if (m.audio_dim != info.audio_dim || m.visual_dim != info.visual_dim || m.num_classes != info.num_classes) {
    throw DataError("checkpoint expects d_a=" + std::to_string(m.audio_dim) + ", d_v=" + std::to_string(m.visual_dim) +
                    ", C=" + std::to_string(m.num_classes) + " but dataset '" + info.name + "' has d_a=" +
                    std::to_string(info.audio_dim) + ", d_v=" + std::to_string(info.visual_dim) +
                    ", C=" + std::to_string(info.num_classes));
  }
}

json model_to_json(const ModelConfig& m) {
  return {{"audio_dim", m.audio_dim},
          {"visual_dim", m.visual_dim},
          {"model_dim", m.model_dim},
          {"num_classes", m.num_classes},
          {"variant", m.variant.name()}};
}

json train_config_to_json(const TrainConfig& c, std::size_t num_classes) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr0", c.lr0},
          {"lr_decay_every", c.lr_decay_every},
          {"lr_decay_factor", c.lr_decay_factor},
          {"seed", c.seed},
          {"variant", c.variant.name()},
          {"smoothing",
           {{"mode", to_string(c.smoothing.mode)},
            {"delta_a", c.smoothing.delta_a},
            {"delta_v", c.smoothing.delta_v},
            {"uniform_size", c.smoothing.uniform_size.value_or(num_classes)}}},
          {"bce", to_string(c.bce)},
          {"model_dim", c.model_dim},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
          {"initializer", "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))"}};
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  SynthConfig cfg;
  SplitFractions fractions;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  a.cfg.validate();
  Dataset ds = synth_generate(a.cfg);
  Splits parts = split(std::move(ds.videos), a.fractions, a.cfg.seed);
  ds.videos.clear();
  for (auto* part : {&parts.train, &parts.val, &parts.test}) {
    for (auto& v : *part) ds.videos.push_back(std::move(v));
  }
  save_dataset(ds, a.out);
  out << "wrote " << ds.videos.size() << " videos (" << parts.train.size() << " train, " << parts.val.size()
      << " val, " << parts.test.size() << " test) to " << (fs::path(a.out) / "manifest.json").string() << "\n";
  return kSuccess;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string data;
  std::string out = "run";
  std::string variant = "AcrossVself";
  std::string smoothing = "NoLS";
  std::string bce = "two-term";
  double delta_a = SmoothingConfig::kDefaultDelta;
  double delta_v = SmoothingConfig::kDefaultDelta;
  std::size_t uniform_size = 0;  // 0: number of classes
  TrainConfig cfg;
  std::string split = "train";
  std::string eval_split = "test";
};

TrainConfig resolve(const TrainArgs& a) {
  TrainConfig cfg = a.cfg;
  try {
    cfg.variant = HanVariant::parse(a.variant);
    cfg.bce = parse_bce_form(a.bce);
    cfg.smoothing = SmoothingConfig::create(parse_smoothing_mode(a.smoothing), a.delta_a, a.delta_v,
                                            a.uniform_size ? std::optional<std::size_t>(a.uniform_size)
                                                           : std::nullopt);
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void write_curves(const fs::path& path, const LossCurves& c) {
  std::ostringstream os;
  os << "epoch,l_wsl,l_a,l_v,total\n";
  for (std::size_t e = 0; e < c.epochs(); ++e) {
    os << e + 1 << ',' << fmt(c.wsl[e]) << ',' << fmt(c.audio[e]) << ',' << fmt(c.visual[e]) << ','
       << fmt(c.total[e]) << '\n';
  }
  write_text(path, os.str());
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig cfg = resolve(a);
  const std::string started = utc_now();
  const fs::path manifest = manifest_path(a.data);
  const Dataset ds = load(manifest);
  const auto train = records_of_split(ds, a.split);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const TrainResult result = fit(train, cfg, [&](std::size_t epoch, const LossValues& m) {
    out << "epoch " << epoch + 1 << "/" << cfg.epochs << "  l_wsl " << m.wsl << "  l_a " << m.audio << "  l_v "
        << m.visual << "  total " << m.total << "\n";
  });

  const fs::path checkpoint = dir / "checkpoint.bin";
  const fs::path curves = dir / "curves.csv";
  save_checkpoint(checkpoint, {result.model, result.params});
  write_curves(curves, result.curves);

  json report_path = nullptr;
  const auto eval = select_split(ds.videos, a.eval_split);
  if (!eval.empty()) {
    const EvalReport report = evaluate_model(result.params, result.model, eval);
    const fs::path report_json = dir / "report.json";
    write_text(report_json, report_to_json(report) + "\n");
    write_text(dir / "report.txt", report_to_table(report));
    report_path = report_json.string();
    out << report_to_table(report);
  }

  const json run{{"command", "train"},
                 {"config", train_config_to_json(cfg, ds.info.num_classes)},
                 {"model", model_to_json(result.model)},
                 {"seed", cfg.seed},
                 {"data", manifest.string()},
                 {"train_split", a.split},
                 {"train_videos", train.size()},
                 {"eval_split", a.eval_split},
                 {"start_time", started},
                 {"end_time", utc_now()},
                 {"checkpoint", checkpoint.string()},
                 {"curves", curves.string()},
                 {"report", report_path}};
  write_text(dir / "run.json", run.dump(2) + "\n");
  out << "wrote " << (dir / "run.json").string() << "\n";
  return kSuccess;
}

// --------------------------------------------------------------- evaluate

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out = ".";
  double threshold = kDefaultThreshold;
};

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  if (!(a.threshold > 0.0 && a.threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load(manifest_path(a.data));
  check_compatible(ck.model, ds.info);
  const auto videos = records_of_split(ds, a.split);

  EvalReport report;
  try {
    report = evaluate_model(ck.params, ck.model, videos, a.threshold);
  } catch (const MissingAnnotationError& e) {
    std::string ids;
    for (const auto& id : e.video_ids()) ids += (ids.empty() ? "" : ", ") + id;
    throw DataError("evaluation needs segment annotations, but split '" + a.split +
                    "' has videos without them: " + ids);
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_text(dir / "report.json", report_to_json(report) + "\n");
  const std::string table = report_to_table(report);
  write_text(dir / "report.txt", table);
  out << table;
  return kSuccess;
}

// ------------------------------------------------------- analyze-attention

struct AttentionArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out = "attention.csv";
};

int cmd_analyze_attention(const AttentionArgs& a, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load(manifest_path(a.data));
  check_compatible(ck.model, ds.info);
  const auto videos = records_of_split(ds, a.split);
  const auto masses = attention_mass(ck.params, ck.model, videos);

  std::ostringstream csv;
  csv << "class,name,audio,visual\n";
  for (const auto& m : masses) {
    const std::string name = m.cls < ds.info.class_names.size() ? ds.info.class_names[m.cls] : "";
    csv << m.cls << ',' << name << ',' << fmt(m.audio) << ',' << fmt(m.visual) << '\n';
  }
  write_text(a.out, csv.str());
  out << csv.str() << "mean audio mass " << mean_audio_mass(masses) << ", mean visual mass "
      << mean_visual_mass(masses) << "\nwrote " << a.out << "\n";
  return kSuccess;
}

// ---------------------------------------------------------- analyze-losses

struct LossArgs {
  std::string curves;
};

LossCurves read_curves(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path.string() + ": cannot open curve file");
  LossCurves c;
  std::string line;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& why) {
    return DataError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "epoch,l_wsl,l_a,l_v,total") throw fail("expected header 'epoch,l_wsl,l_a,l_v,total'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw fail("not a number: '" + cell + "'");
      }
      if (used != cell.size() || !std::isfinite(x)) throw fail("not a finite number: '" + cell + "'");
      cells.push_back(x);
    }
    if (cells.size() != 5) throw fail("expected 5 columns, found " + std::to_string(cells.size()));
    c.wsl.push_back(cells[1]);
    c.audio.push_back(cells[2]);
    c.visual.push_back(cells[3]);
    c.total.push_back(cells[4]);
  }
  if (lineno == 0) throw DataError(path.string() + ":1: empty curve file");
  if (c.epochs() == 0) throw fail("no epochs recorded");
  return c;
}

int cmd_analyze_losses(const LossArgs& a, std::ostream& out) {
  const LossCurves c = read_curves(a.curves);
  const double mse_a = curve_mse(c.wsl, c.audio);
  const double mse_v = curve_mse(c.wsl, c.visual);
  std::string ratio;
  if (mse_a > 0.0) {
    ratio = fmt(mse_v / mse_a);
  } else {
    ratio = mse_v > 0.0 ? "inf" : "indeterminate";
  }
  out << "mse_wsl_a " << fmt(mse_a) << "\nmse_wsl_v " << fmt(mse_v) << "\nratio " << ratio << "\n";
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual video parsing: synthesize data, train, evaluate, analyze."};
  app.name("avvp");
  app.require_subcommand(1);

  SynthArgs synth;
  synth.out = default_data_dir();
  auto* s = app.add_subcommand("synth", "Generate a synthetic planted-event dataset");
  s->add_option("--out", synth.out, "Output directory")->capture_default_str();
  s->add_option("--videos", synth.cfg.num_videos)->capture_default_str();
  s->add_option("--segments", synth.cfg.segments)->capture_default_str();
  s->add_option("--classes", synth.cfg.num_classes)->capture_default_str();
  s->add_option("--audio-dim", synth.cfg.audio_dim)->capture_default_str();
  s->add_option("--visual-dim", synth.cfg.visual_dim)->capture_default_str();
  s->add_option("--audio-signal-scale", synth.cfg.audio_signal_scale)->capture_default_str();
  s->add_option("--visual-signal-scale", synth.cfg.visual_signal_scale)->capture_default_str();
  s->add_option("--noise", synth.cfg.noise)->capture_default_str();
  s->add_option("--p-audio-only", synth.cfg.p_audio_only)->capture_default_str();
  s->add_option("--p-visual-only", synth.cfg.p_visual_only)->capture_default_str();
  s->add_option("--p-audio-visual", synth.cfg.p_audio_visual)->capture_default_str();
  s->add_option("--min-events", synth.cfg.min_events)->capture_default_str();
  s->add_option("--max-events", synth.cfg.max_events)->capture_default_str();
  s->add_option("--min-event-length", synth.cfg.min_event_length)->capture_default_str();
  s->add_option("--train-fraction", synth.fractions.train)->capture_default_str();
  s->add_option("--val-fraction", synth.fractions.val)->capture_default_str();
  s->add_option("--test-fraction", synth.fractions.test)->capture_default_str();
  s->add_option("--seed", synth.cfg.seed)->capture_default_str();

  TrainArgs train;
  train.data = default_data_dir();
  auto* t = app.add_subcommand("train", "Train a model on the train split");
  t->add_option("--data", train.data, "Dataset directory or manifest")->capture_default_str();
  t->add_option("--out", train.out, "Run directory")->capture_default_str();
  t->add_option("--variant", train.variant, "AcrossVcross, AcrossVself, AselfVcross or AselfVself")
      ->capture_default_str();
  t->add_option("--smoothing", train.smoothing, "NoLS, LSA, LSV or LSAV")->capture_default_str();
  t->add_option("--delta-a", train.delta_a)->capture_default_str();
  t->add_option("--delta-v", train.delta_v)->capture_default_str();
  t->add_option("--uniform-size", train.uniform_size, "K of the uniform component (0: number of classes)")
      ->capture_default_str();
  t->add_option("--bce", train.bce, "two-term or positive-only")->capture_default_str();
  t->add_option("--epochs", train.cfg.epochs)->capture_default_str();
  t->add_option("--batch-size", train.cfg.batch_size)->capture_default_str();
  t->add_option("--lr", train.cfg.lr0)->capture_default_str();
  t->add_option("--lr-decay-every", train.cfg.lr_decay_every)->capture_default_str();
  t->add_option("--lr-decay-factor", train.cfg.lr_decay_factor)->capture_default_str();
  t->add_option("--model-dim", train.cfg.model_dim)->capture_default_str();
  t->add_option("--seed", train.cfg.seed)->capture_default_str();
  t->add_option("--split", train.split, "Split to train on ('all' for every video)")->capture_default_str();
  t->add_option("--eval-split", train.eval_split, "Annotated split scored after training, if present")
      ->capture_default_str();

  EvalArgs eval;
  eval.data = default_data_dir();
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on an annotated split");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--data", eval.data)->capture_default_str();
  e->add_option("--split", eval.split)->capture_default_str();
  e->add_option("--out", eval.out, "Directory for report.json and report.txt")->capture_default_str();
  e->add_option("--threshold", eval.threshold)->capture_default_str();

  AttentionArgs att;
  att.data = default_data_dir();
  auto* aa = app.add_subcommand("analyze-attention", "Per-class audio/visual mass of the modality attention");
  aa->add_option("--checkpoint", att.checkpoint)->required();
  aa->add_option("--data", att.data)->capture_default_str();
  aa->add_option("--split", att.split)->capture_default_str();
  aa->add_option("--out", att.out, "CSV path")->capture_default_str();

  LossArgs losses;
  auto* al = app.add_subcommand("analyze-losses", "MSE between the video-level and modality loss curves");
  al->add_option("--curves", losses.curves, "curves.csv of a run")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(train, out);
    if (e->parsed()) return cmd_evaluate(eval, out);
    if (aa->parsed()) return cmd_analyze_attention(att, out);
    if (al->parsed()) return cmd_analyze_losses(losses, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const MissingAnnotationError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const ContractError& ex) {
    err << "invariant violation: " << ex.what() << "\n";
    return kInvariant;
  } catch (const std::invalid_argument& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  } catch (const std::exception& ex) {
    err << "invariant violation: " << ex.what() << "\n";
    return kInvariant;
  }
  return kUsage;
}

}  // namespace avvp::cli
