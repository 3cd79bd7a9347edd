// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0
//
// degan command-line tool. Exit codes: 0 success, 2 usage or configuration
// error, 3 runtime or data error.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <opencv2/core.hpp>

#include "degan/degan.hpp"

namespace fs = std::filesystem;
using namespace degan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

/// Raised for bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- synthesize ---------------------------------------------------------------

struct SynthesizeArgs {
  std::string clean_dir, spec, preset = "dense_watermark", out, from_manifest;
  std::size_t count = 0;
  std::optional<std::uint64_t> seed;
};

int run_synthesize(const SynthesizeArgs& a) {
  if (!a.from_manifest.empty()) {
    degrade::regenerate_corpus(a.from_manifest, a.clean_dir, a.out);
    std::cout << "regenerated corpus from " << a.from_manifest << " into " << a.out << "\n";
    return 0;
  }
  degrade::DegradationSpec spec;
  if (!a.spec.empty()) {
    spec = degrade::load_spec(a.spec);
  } else {
    kv::Document doc{{"preset", a.preset}};
    if (a.preset == "none") doc["kinds"] = "watermark";
    spec = degrade::from_document(doc);
  }
  if (a.seed) spec.seed = *a.seed;
  const auto m = degrade::build_corpus(a.clean_dir, spec, a.out, a.count);
  std::cout << "wrote " << m.records.size() << " pairs and "
            << (fs::path(a.out) / degrade::kManifestFile).string() << "\n";
  return 0;
}

// -- pages --------------------------------------------------------------------

struct PagesArgs {
  std::string out;
  std::size_t count = 0;
  int height = 512, width = 512;
  std::uint64_t seed = 0;
};

int run_pages(const PagesArgs& a) {
  if (a.height < 1 || a.width < 1) throw UsageError("--height and --width must be >= 1");
  for (std::size_t i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "page_%05zu.png", i);
    save_png(fs::path(a.out) / name,
             degrade::synthesize_clean_page(a.height, a.width, sub_seed(a.seed, i)));
  }
  std::cout << "wrote " << a.count << " clean pages to " << a.out << "\n";
  return 0;
}

// -- train --------------------------------------------------------------------

struct TrainArgs {
  std::string degraded_dir, clean_dir, task, config, out_checkpoint, resume;
  std::optional<double> lambda, lr, val_fraction;
  std::optional<int> batch_size, stride, gen_depth, gen_base, disc_base;
  std::optional<std::uint64_t> max_steps, seed, checkpoint_every;
  std::string mode, adversarial_form;
  std::uint64_t log_every = 50;
};

TrainConfig assemble_config(const TrainArgs& a, const std::optional<CheckpointData>& resume) {
  TrainConfig cfg = resume ? Trainer::checkpoint_config(*resume) : TrainConfig{};
  std::string cfg_path = a.config;
  if (cfg_path.empty())
    if (const char* env = std::getenv("DEGAN_CONFIG"); env && *env) cfg_path = env;
  if (!cfg_path.empty()) cfg = apply_document(cfg, kv::parse_file(cfg_path));
  if (!a.task.empty()) cfg.task = task_from_string(a.task);
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.val_fraction) cfg.val_fraction = *a.val_fraction;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.stride) cfg.patch_stride = *a.stride;
  if (a.gen_depth) cfg.generator.depth = *a.gen_depth;
  if (a.gen_base) cfg.generator.base_channels = *a.gen_base;
  if (a.disc_base) cfg.discriminator.base_channels = *a.disc_base;
  if (a.max_steps) cfg.max_steps = *a.max_steps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  if (!a.mode.empty()) cfg.mode = mode_from_string(a.mode);
  if (!a.adversarial_form.empty()) cfg.adversarial_form = form_from_string(a.adversarial_form);
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  std::optional<CheckpointData> resume;
  if (!a.resume.empty()) resume = read_checkpoint(a.resume);
  const TrainConfig cfg = assemble_config(a, resume);

  PairedDataset data = ingest_paired_dirs(a.degraded_dir, a.clean_dir, cfg);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "training on " << data.size() << " patch pairs; task " << to_string(cfg.task)
            << ", lambda " << cfg.effective_lambda() << ", mode " << to_string(cfg.mode) << "\n";

  Trainer trainer(cfg, std::move(data));
  if (!trainer.val_indices().empty())
    std::cerr << "validation: " << trainer.val_indices().size() << " patch pairs held out\n";
  const fs::path ckpt = a.out_checkpoint;
  std::optional<std::uint64_t> resume_step;
  fs::path log_source;
  if (resume) {
    trainer.restore(*resume);
    resume_step = trainer.step();
    log_source = loss_log_path(a.resume);
    std::cerr << "resumed at step " << trainer.step() << "\n";
  }
  LossLog log(loss_log_path(ckpt), cfg, resume_step, log_source);

  try {
    run_training(trainer, ckpt, log, [&](std::uint64_t step, const LossBreakdown& lb) {
      if (a.log_every > 0 && (step % a.log_every == 0 || step == cfg.max_steps))
        std::cerr << "step " << step << "  D " << lb.adversarial_D << "  G " << lb.adversarial_G
                  << "  pix " << lb.pixel_log << "  total " << lb.combined_G << "\n";
    });
  } catch (const TrainingDiverged& e) {
    log.flush();
    fs::path diag = ckpt;
    diag += ".diverged.txt";
    std::ofstream(diag) << e.what() << "\n";
    std::cerr << "error: " << e.what() << "\ndiagnostics written to " << diag.string() << "\n";
    return kExitRuntime;
  }
  if (!trainer.val_indices().empty())
    std::cerr << "validation pixel_log " << trainer.validation_pixel_loss() << "\n";
  std::cout << "checkpoint " << ckpt.string() << " at step " << trainer.step() << "\n"
            << "loss log " << log.path().string() << "\n";
  return 0;
}

// -- enhance ------------------------------------------------------------------

struct EnhanceArgs {
  std::string checkpoint, input, output, side_by_side;
  int stride = 128;
  bool binarize = false;
  float threshold = 0.5f;
};

int run_enhance(const EnhanceArgs& a) {
  if (a.stride < 1 || a.stride > kPatchSize)
    throw UsageError("--stride must be in [1, " + std::to_string(kPatchSize) + "]");
  if (!(a.threshold > 0.0f && a.threshold < 1.0f)) throw UsageError("--threshold must be in (0,1)");
  const auto gen = load_generator(a.checkpoint);

  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(a.input)) {
    for (const auto& p : degrade::list_images(a.input))
      jobs.emplace_back(p, fs::path(a.output) / (p.stem().string() + ".png"));
  } else {
    jobs.emplace_back(a.input, a.output);
  }
  for (const auto& [in, out] : jobs) {
    const ImagePlane img = load_image(in);
    const ImagePlane enhanced = enhance(gen, img, a.stride);
    cv::Mat result;
    if (a.binarize) {
      const auto mask = to_binary(enhanced, a.threshold);
      save_png(out, mask);
      result = to_mat8(mask.to_plane());
    } else {
      save_png(out, enhanced);
      result = to_mat8(enhanced);
    }
    if (!a.side_by_side.empty()) {
      cv::Mat both;
      cv::hconcat(to_mat8(img), result, both);
      const fs::path sbs = jobs.size() == 1 ? fs::path(a.side_by_side)
                                            : fs::path(a.side_by_side) / out.filename();
      write_mat_png(sbs, both);
    }
    std::cout << in.string() << " -> " << out.string() << "\n";
  }
  return 0;
}

// -- evaluate -----------------------------------------------------------------

struct EvaluateArgs {
  std::string pred_dir, gt_dir, report;
  bool binary = false;
  float threshold = 0.5f;
  unsigned threads = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  std::map<std::string, fs::path> pred, gt;
  for (const auto& p : degrade::list_images(a.pred_dir)) pred.emplace(p.stem().string(), p);
  for (const auto& p : degrade::list_images(a.gt_dir)) gt.emplace(p.stem().string(), p);
  std::vector<NamedPair> pairs;
  for (const auto& [stem, path] : pred) {
    auto it = gt.find(stem);
    if (it == gt.end()) {
      std::cerr << "warning: '" << stem << "' has no ground truth; skipped\n";
      continue;
    }
    pairs.push_back({stem, load_image(path), load_image(it->second)});
  }
  for (const auto& [stem, path] : gt)
    if (!pred.count(stem)) std::cerr << "warning: '" << stem << "' has no prediction; skipped\n";
  if (pairs.empty()) {
    std::cerr << "error: no (prediction, ground truth) pairs to evaluate\n";
    return kExitRuntime;
  }
  EvalOptions opt;
  if (a.binary) opt.binary_threshold = a.threshold;
  const unsigned threads = a.threads ? a.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto rep = evaluate_corpus(pairs, opt, threads);
  write_report_table(std::cout, rep);
  if (!a.report.empty()) {
    const fs::path path(a.report);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw IoError("cannot write report '" + a.report + "'");
    write_report_csv(os, rep);
    if (!os) throw IoError("cannot write report '" + a.report + "'");
  }
  return 0;
}

// -- binarize-baseline ----------------------------------------------------------

struct BaselineArgs {
  std::string method, input, output;
  std::optional<int> window;
  std::optional<double> k;
  double R = 0.5;
};

int run_baseline(const BaselineArgs& a) {
  if (a.method != "otsu" && a.method != "niblack" && a.method != "sauvola")
    throw UsageError("unknown method '" + a.method + "' (expected otsu, niblack or sauvola)");
  const int window = a.window.value_or(a.method == "sauvola" ? 25 : 15);
  if (a.method != "otsu") {
    try {
      baselines::check_window(window);
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
    if (a.method == "sauvola" && !(a.R > 0.0)) throw UsageError("--R must be > 0");
  }
  const ImagePlane img = load_image(a.input);
  BinaryMask out;
  if (a.method == "otsu")
    out = baselines::otsu(img);
  else if (a.method == "niblack")
    out = baselines::niblack(img, window, a.k.value_or(-0.2));
  else
    out = baselines::sauvola(img, window, a.k.value_or(0.5), a.R);
  save_png(a.output, out);
  std::cout << a.input << " -> " << a.output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"degan: adversarial document enhancement (cleanup, binarization, watermark removal, deblurring)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "degan 1.0.0");

  SynthesizeArgs sa;
  auto* synth = app.add_subcommand("synthesize", "Build a degraded/clean paired corpus from clean pages");
  synth->add_option("--clean-dir", sa.clean_dir, "Directory of clean page images")->required();
  synth->add_option("--out", sa.out, "Output directory (degraded/, clean/, manifest.tsv)")->required();
  synth->add_option("--count", sa.count, "Number of pairs to write")->required();
  synth->add_option("--spec", sa.spec, "Degradation spec file (key = value)");
  synth->add_option("--preset", sa.preset, "Built-in spec when --spec is absent")
      ->check(CLI::IsMember({"dense_watermark", "none"}))
      ->capture_default_str();
  synth->add_option("--seed", sa.seed, "Master seed (overrides the spec)");
  synth->add_option("--from-manifest", sa.from_manifest,
                    "Re-render the corpus recorded in this manifest instead");

  PagesArgs pa;
  auto* pages = app.add_subcommand("pages", "Render synthetic clean text pages");
  pages->add_option("--out", pa.out, "Output directory")->required();
  pages->add_option("--count", pa.count, "Number of pages")->required();
  pages->add_option("--height", pa.height, "Page height in pixels")->capture_default_str();
  pages->add_option("--width", pa.width, "Page width in pixels")->capture_default_str();
  pages->add_option("--seed", pa.seed, "Seed")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train generator and discriminator on paired images");
  train->add_option("--degraded-dir", ta.degraded_dir, "Degraded images")->required();
  train->add_option("--clean-dir", ta.clean_dir, "Ground-truth images (paired by stem)")->required();
  train->add_option("--out-checkpoint", ta.out_checkpoint, "Checkpoint to write")->required();
  train->add_option("--task", ta.task, "cleanup | binarize | watermark | deblur (sets default lambda)");
  train->add_option("--config", ta.config, "Config file (key = value); default $DEGAN_CONFIG");
  train->add_option("--resume", ta.resume, "Continue from this checkpoint");
  train->add_option("--lambda", ta.lambda, "Pixel-loss weight");
  train->add_option("--lr", ta.lr, "Adam learning rate");
  train->add_option("--batch-size", ta.batch_size, "Patch pairs per step");
  train->add_option("--max-steps", ta.max_steps, "Stop after this many steps");
  train->add_option("--seed", ta.seed, "Master seed");
  train->add_option("--stride", ta.stride, "Patch stride for training data");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Intermediate checkpoint period (0: end only)");
  train->add_option("--mode", ta.mode, "adversarial | generator_only");
  train->add_option("--adversarial-form", ta.adversarial_form, "non_saturating | saturating");
  train->add_option("--val-fraction", ta.val_fraction, "Fraction of source images held out");
  train->add_option("--gen-depth", ta.gen_depth, "Generator pooling stages");
  train->add_option("--gen-base", ta.gen_base, "Generator first-stage channels");
  train->add_option("--disc-base", ta.disc_base, "Discriminator first-stage channels");
  train->add_option("--log-every", ta.log_every, "Progress line period (0: silent)")->capture_default_str();

  EnhanceArgs ea;
  auto* enh = app.add_subcommand("enhance", "Enhance images with a trained generator");
  enh->add_option("--checkpoint", ea.checkpoint, "Trained checkpoint")->required();
  enh->add_option("--input", ea.input, "Input image or directory")->required();
  enh->add_option("--output", ea.output, "Output image or directory")->required();
  enh->add_option("--stride", ea.stride, "Patch stride")->capture_default_str();
  enh->add_flag("--binarize", ea.binarize, "Write a binary image");
  enh->add_option("--threshold", ea.threshold, "Binarization threshold")->capture_default_str();
  enh->add_option("--side-by-side", ea.side_by_side, "Also write input|output comparison image(s) here");

  EvaluateArgs va;
  auto* eval = app.add_subcommand("evaluate", "Score predictions against ground truth");
  eval->add_option("--pred-dir", va.pred_dir, "Predicted images")->required();
  eval->add_option("--gt-dir", va.gt_dir, "Ground-truth images (paired by stem)")->required();
  eval->add_flag("--binary", va.binary, "Threshold both images before scoring");
  eval->add_option("--threshold", va.threshold, "Threshold for --binary")->capture_default_str();
  eval->add_option("--report", va.report, "Write a CSV report here");
  eval->add_option("--threads", va.threads, "Worker threads (0: hardware)")->capture_default_str();

  BaselineArgs ba;
  auto* base = app.add_subcommand("binarize-baseline", "Classic thresholding binarizers");
  base->add_option("--method", ba.method, "otsu | niblack | sauvola")->required();
  base->add_option("--input", ba.input, "Input image")->required();
  base->add_option("--output", ba.output, "Output PNG")->required();
  base->add_option("--window", ba.window, "Odd window size (niblack 15, sauvola 25)");
  base->add_option("--k", ba.k, "k (niblack -0.2, sauvola 0.5)");
  base->add_option("--R", ba.R, "Sauvola dynamic range on [0,1]")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return run_synthesize(sa);
    if (*pages) return run_pages(pa);
    if (*train) return run_train(ta);
    if (*enh) return run_enhance(ea);
    if (*eval) return run_evaluate(va);
    if (*base) return run_baseline(ba);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
