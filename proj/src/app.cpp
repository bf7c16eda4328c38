#include "leafstress/app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "leafstress/checkpoint.hpp"
#include "leafstress/config.hpp"
#include "leafstress/dataset.hpp"
#include "leafstress/metrics.hpp"
#include "leafstress/trainer.hpp"
#include "leafstress/tsne.hpp"

namespace leafstress {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kTsneTag = 0x54534e45;  // "TSNE"

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

struct Options {
  std::string manifest;
  std::string checkpoint;
  std::string split = "test";
  std::string mode;
  std::optional<std::size_t> epochs;
  std::optional<bool> augment;
  bool mixup = false;
  std::optional<std::size_t> per_class;
  std::optional<std::size_t> image_size;
  std::string kind;
  std::string train_report;
  bool standardize = false;
};

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

RunConfig resolve(const Globals& g, const Options& o) {
  RunConfig cfg;
  if (!g.config.empty()) cfg = load_config(g.config, cfg);
  if (g.seed) cfg.seed = *g.seed;
  if (!o.mode.empty()) {
    const auto m = parse_task_mode(o.mode);
    if (!m) throw Error(ErrorKind::InvalidConfig, "unknown mode '" + o.mode + "'");
    cfg.model.mode = *m;
  }
  if (o.epochs) cfg.sgd.epochs = *o.epochs;
  if (o.augment) cfg.augment_enabled = *o.augment;
  if (o.mixup) cfg.augment.mixup_enabled = true;
  if (o.per_class) cfg.synth.per_class = *o.per_class;
  if (o.image_size) cfg.synth.image_size = *o.image_size;
  if (!o.kind.empty()) {
    const auto k = parse_kind(o.kind);
    if (!k) throw Error(ErrorKind::InvalidConfig, "unknown kind '" + o.kind + "'");
    cfg.synth.kind = *k;
  }
  if (o.standardize) cfg.tsne_standardize = true;
  cfg.finalize();
  return cfg;
}

fs::path prepare_out(const Globals& g, const RunConfig& cfg) {
  const fs::path dir = g.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::IoError, "cannot create output directory " + dir.string());
  write_text(dir / "resolved_config.ini", format_config(cfg));
  return dir;
}

std::vector<std::size_t> select(const std::vector<ManifestRecord>& recs, const std::string& split) {
  std::optional<Split> want;
  if (split != "all") {
    want = parse_split(split);
    if (!want) throw Error(ErrorKind::InvalidConfig, "unknown split '" + split + "'");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (want && !recs[i].split)
      throw Error(ErrorKind::InvalidConfig, "manifest has no split assignments; run prepare first");
    if (!want || recs[i].split == want) idx.push_back(i);
  }
  return idx;
}

void require_labels(const std::vector<ManifestRecord>& recs, const std::vector<std::size_t>& idx, TaskMode mode) {
  if (!has_severity_head(mode)) return;
  for (std::size_t i : idx)
    if (!recs[i].severity)
      throw Error(ErrorKind::MissingSeverity, "mode " + std::string(to_string(mode)) + " needs severity labels; '" +
                                                  recs[i].path + "' has none");
}

std::vector<LabeledSample> load_samples(const fs::path& manifest, const std::vector<ManifestRecord>& recs,
                                        const std::vector<std::size_t>& idx, std::size_t size) {
  std::vector<LabeledSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    ImageRGB img = read_image(resolve_record_path(manifest, recs[i]));
    if (img.height != size || img.width != size) img = resize_bilinear(img, size, size);
    LabeledSample s;
    s.image = to_tensor(img);
    s.y_stress = one_hot(static_cast<std::size_t>(recs[i].stress));
    if (recs[i].severity) s.y_severity = one_hot(static_cast<std::size_t>(*recs[i].severity));
    out.push_back(std::move(s));
  }
  return out;
}

MultiTaskNet load_net(const RunConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw Error(ErrorKind::InvalidConfig, "--checkpoint is required");
  const auto ckpt = load_checkpoint(checkpoint);
  MultiTaskNet net(cfg.model, cfg.seed);
  restore(net, ckpt);
  return net;
}

std::vector<std::string> names(const auto& arr) { return {arr.begin(), arr.end()}; }

int cmd_synth(const Globals& g, const Options& o, std::ostream& out) {
  const auto cfg = resolve(g, o);
  const auto dir = prepare_out(g, cfg);
  const auto recs = generate_synthetic(cfg.synth, dir);
  out << "wrote " << recs.size() << " images and " << (dir / "manifest.csv").string() << "\n";
  return 0;
}

int cmd_prepare(const Globals& g, const Options& o, std::ostream& out) {
  const auto cfg = resolve(g, o);
  if (o.manifest.empty()) throw Error(ErrorKind::InvalidConfig, "--manifest is required");
  auto recs = load_manifest(o.manifest, true);
  if (recs.empty()) throw Error(ErrorKind::EmptyDataset, "manifest lists no images");
  const auto dir = prepare_out(g, cfg);
  fs::create_directories(dir / "prepared");
  const auto split = stratified_split(recs, cfg.split);
  for (const auto& w : split.warnings) out << "warning: " << w << "\n";
  recs = split.records;

  std::ostringstream report;
  report << "path,leaf_pixels,symptom_ratio,computed_severity,label_severity,match\n";
  std::size_t checked = 0, agreed = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const ImageRGB img = read_image(resolve_record_path(o.manifest, recs[i]));
    const Mask leaf = segment_leaf(img, cfg.imaging.s_threshold);
    const Mask sym = segment_symptoms(img, leaf, cfg.imaging);
    const auto sev = severity_ratio_and_bin(sym, leaf);
    const bool match = !recs[i].severity || *recs[i].severity == sev.severity;
    if (recs[i].severity) {
      ++checked;
      agreed += match;
    }
    char row[64];
    std::snprintf(row, sizeof row, "%.6f", sev.ratio);
    report << recs[i].path << ',' << leaf.count() << ',' << row << ',' << to_string(sev.severity) << ','
           << (recs[i].severity ? std::string(to_string(*recs[i].severity)) : "") << ','
           << (match ? "yes" : "no") << "\n";

    char name[32];
    std::snprintf(name, sizeof name, "prepared/%05zu.ppm", i);
    write_ppm(dir / name, crop_and_resize(img, leaf, cfg.imaging.margin_frac, cfg.model.input_size,
                                          cfg.model.input_size));
    recs[i].path = name;
  }
  write_manifest(dir / "prepared_manifest.csv", recs);
  write_text(dir / "prepare_report.csv", report.str());
  std::size_t counts[3] = {};
  for (const auto& r : recs) ++counts[static_cast<std::size_t>(*r.split)];
  out << "train " << counts[0] << ", val " << counts[1] << ", test " << counts[2] << "\n";
  if (checked) out << "severity agreement " << agreed << "/" << checked << "\n";
  return 0;
}

int cmd_train(const Globals& g, const Options& o, std::ostream& out) {
  const auto cfg = resolve(g, o);
  if (o.manifest.empty()) throw Error(ErrorKind::InvalidConfig, "--manifest is required");
  const auto recs = load_manifest(o.manifest);
  const auto tr = select(recs, "train"), va = select(recs, "val");
  require_labels(recs, tr, cfg.model.mode);
  require_labels(recs, va, cfg.model.mode);
  const auto dir = prepare_out(g, cfg);
  const auto train_set = load_samples(o.manifest, recs, tr, cfg.model.input_size);
  const auto val_set = load_samples(o.manifest, recs, va, cfg.model.input_size);

  MultiTaskNet net(cfg.model, cfg.seed);
  TrainConfig tc{cfg.sgd, cfg.schedule, cfg.augment, cfg.augment_enabled, cfg.seed};
  const auto result = train(net, train_set, val_set, tc, [&](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %3zu  lr %.5f  train %.4f  val %.4f  acc %.3f/%.3f  %.1fs\n", r.epoch,
                  r.lr, r.train_loss, r.val_loss, r.val_acc_stress, r.val_acc_severity, r.seconds);
    out << line << std::flush;
  });
  save_checkpoint(dir / "checkpoint.lfst", result.best);
  write_train_report(dir / "train_report.csv", result.report);
  out << "best epoch " << result.report.best_epoch << "\n";
  return 0;
}

// Training wall time from a train_report.csv: (epochs, total seconds).
std::optional<std::pair<std::size_t, double>> read_epoch_seconds(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  std::size_t col = 0;
  {
    std::stringstream hs(line);
    std::string h;
    bool found = false;
    for (; std::getline(hs, h, ','); ++col)
      if (h == "seconds") {
        found = true;
        break;
      }
    if (!found) return std::nullopt;
  }
  std::size_t epochs = 0;
  double total = 0.0;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t c = 0; c <= col; ++c) std::getline(ls, cell, ',');
    total += std::stod(cell);
    ++epochs;
  }
  return std::pair{epochs, total};
}

int cmd_evaluate(const Globals& g, const Options& o, std::ostream& out) {
  const auto cfg = resolve(g, o);
  if (o.manifest.empty()) throw Error(ErrorKind::InvalidConfig, "--manifest is required");
  const auto recs = load_manifest(o.manifest);
  const auto idx = select(recs, o.split);
  if (idx.empty()) throw Error(ErrorKind::EmptyDataset, "no records in split '" + o.split + "'");
  require_labels(recs, idx, cfg.model.mode);
  auto net = load_net(cfg, o.checkpoint);
  const auto dir = prepare_out(g, cfg);
  const auto samples = load_samples(o.manifest, recs, idx, cfg.model.input_size);

  const auto t0 = std::chrono::steady_clock::now();
  const auto ev = evaluate(net, samples, cfg.sgd.batch_size);
  const double eval_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<TaskReport> tasks;
  if (ev.stress) tasks.push_back({"stress", *ev.stress, names(kStressNames)});
  if (ev.severity) tasks.push_back({"severity", *ev.severity, names(kSeverityNames)});
  report_write(tasks, dir);
  for (const auto& t : tasks) {
    const auto pr = macro_precision_recall(t.cm);
    char line[128];
    std::snprintf(line, sizeof line, "%-9s accuracy %.4f  precision %.4f  recall %.4f\n", t.task.c_str(),
                  accuracy(t.cm), pr.precision, pr.recall);
    out << line;
  }

  const fs::path report = o.train_report.empty() ? fs::path(o.checkpoint).parent_path() / "train_report.csv"
                                                 : fs::path(o.train_report);
  std::ostringstream timing;
  timing << "stage,count,total_seconds,mean_seconds\n";
  char row[128];
  if (const auto tr = read_epoch_seconds(report); tr && tr->first > 0) {
    std::snprintf(row, sizeof row, "train_epoch,%zu,%.3f,%.3f\n", tr->first, tr->second, tr->second / tr->first);
    timing << row;
  }
  std::snprintf(row, sizeof row, "evaluate_sample,%zu,%.3f,%.6f\n", samples.size(), eval_s,
                eval_s / double(samples.size()));
  timing << row;
  write_text(dir / "timing.csv", timing.str());
  return 0;
}

int cmd_embed(const Globals& g, const Options& o, std::ostream& out) {
  const auto cfg = resolve(g, o);
  if (o.manifest.empty()) throw Error(ErrorKind::InvalidConfig, "--manifest is required");
  const auto recs = load_manifest(o.manifest);
  const auto idx = select(recs, o.split);
  auto net = load_net(cfg, o.checkpoint);
  const auto dir = prepare_out(g, cfg);
  auto samples = load_samples(o.manifest, recs, idx, cfg.model.input_size);
  // Labels only matter for the CSV; eval needs targets for every head present.
  for (auto& s : samples)
    if (!s.y_severity && has_severity_head(cfg.model.mode)) s.y_severity = one_hot(0);
  const auto ev = evaluate(net, samples, cfg.sgd.batch_size);
  const Tensor64 features = cfg.tsne_standardize ? standardize_columns(ev.features) : ev.features;
  RngStream stream(cfg.seed, kTsneTag);
  const auto emb = run_tsne(features, cfg.tsne, stream);

  std::vector<EmbeddingRow> rows;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& r = recs[idx[i]];
    rows.push_back({r.path, emb.y.at(i, 0), emb.y.at(i, 1), std::string(to_string(r.stress)),
                    r.severity ? std::string(to_string(*r.severity)) : ""});
  }
  write_embedding_csv(dir / "embedding.csv", rows);
  char line[96];
  std::snprintf(line, sizeof line, "embedded %zu points, KL %.4f -> %.4f\n", rows.size(), emb.kl_trace.front(),
                emb.kl_trace.back());
  out << line;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coffee-leaf biotic stress and severity classification"};
  app.require_subcommand(1);
  Globals g;
  Options o;
  app.add_option("--config", g.config, "INI file with [model] [sgd] [schedule] [augment] [split] [tsne] [imaging] [synth]");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "Directory for every artifact of the run");

  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic leaf dataset");
  synth->add_option("--per-class", o.per_class);
  synth->add_option("--image-size", o.image_size);
  synth->add_option("--kind", o.kind, "leaf or symptom");

  auto* prepare = app.add_subcommand("prepare", "Validate a manifest, assign splits and crop leaves");
  prepare->add_option("--manifest", o.manifest)->required();

  auto* trn = app.add_subcommand("train", "Train on the train split, select on the val split");
  trn->add_option("--manifest", o.manifest, "Prepared manifest")->required();
  trn->add_option("--mode", o.mode, "multi_task, single_task_stress or single_task_severity");
  trn->add_option("--epochs", o.epochs);
  trn->add_flag("--augment,!--no-augment", o.augment, "Standard augmentation");
  trn->add_flag("--mixup", o.mixup);

  auto* eval = app.add_subcommand("evaluate", "Score a checkpoint on one split");
  eval->add_option("--manifest", o.manifest)->required();
  eval->add_option("--checkpoint", o.checkpoint)->required();
  eval->add_option("--split", o.split, "train, val, test or all");
  eval->add_option("--mode", o.mode);
  eval->add_option("--train-report", o.train_report, "Defaults to train_report.csv beside the checkpoint");

  auto* embed = app.add_subcommand("embed", "t-SNE of the pooled features of one split");
  embed->add_option("--manifest", o.manifest)->required();
  embed->add_option("--checkpoint", o.checkpoint)->required();
  embed->add_option("--split", o.split, "train, val, test or all");
  embed->add_option("--mode", o.mode);
  embed->add_flag("--standardize", o.standardize);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*synth) return cmd_synth(g, o, out);
    if (*prepare) return cmd_prepare(g, o, out);
    if (*trn) return cmd_train(g, o, out);
    if (*eval) return cmd_evaluate(g, o, out);
    return cmd_embed(g, o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_io_error(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace leafstress
