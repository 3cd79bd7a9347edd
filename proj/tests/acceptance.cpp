// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. One criterion per invocation:
//
//   degan_acceptance --criterion N --workdir DIR
//
// prints a single "criterion N: PASS|FAIL ..." line and exits nonzero on FAIL.
// Training criteria leave their loss logs, images and reports under DIR.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "degan/degan.hpp"
#include "oracle.hpp"

using namespace degan;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kTolExact = 1e-9;        // PSNR, F-measure, local statistics
constexpr double kTolWindowed = 1e-6;     // SSIM, DRD
constexpr double kTolGradRel = 1e-3;      // finite differences
constexpr double kMetricSeconds = 30.0;
constexpr double kGradSeconds = 60.0;
constexpr double kOverfitSeconds = 1800.0;
constexpr double kOverfitPsnr = 25.0;
constexpr double kOverfitRatio = 10.0;
constexpr double kEndToEndGainDb = 3.0;

// Overfit run: 8 single-patch pages.
constexpr int kOverfitPairs = 8;
constexpr std::uint64_t kOverfitSteps = 2000;
constexpr int kOverfitDepth = 3;
constexpr int kOverfitBase = 16;
constexpr int kOverfitDiscBase = 8;

// End-to-end run: 200 training pages, 40 held out.
constexpr int kTrainPairs = 200;
constexpr int kHeldOutPairs = 40;
constexpr std::uint64_t kEndToEndSteps = 3000;
constexpr int kEndToEndDepth = 3;
constexpr int kEndToEndBase = 8;
constexpr int kEndToEndDiscBase = 8;
constexpr int kEndToEndBatch = 2;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*f", digits, v);
  return b;
}

std::string sci(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.3e", v);
  return b;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ImagePlane random_plane(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = u(rng);
  return ImagePlane::from_values(h, w, std::move(v));
}

BinaryMask random_mask(int h, int w, double ink, std::mt19937_64& rng) {
  std::bernoulli_distribution b(ink);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = b(rng) ? 0 : 1;
  return BinaryMask::from_values(h, w, std::move(v));
}

oracle::Grid grid(const ImagePlane& p) {
  oracle::Grid g{p.height(), p.width(), {}};
  for (float v : p.values()) g.v.push_back(v);
  return g;
}

oracle::Ink ink(const BinaryMask& m) {
  oracle::Ink k{m.height(), m.width(), {}};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) k.v.push_back(m.is_ink(y, x));
  return k;
}

std::vector<int> levels_of(const ImagePlane& img) {
  std::vector<int> lv;
  for (float v : img.values()) lv.push_back(to_level(v));
  return lv;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20260101);
  double worst_exact = 0.0, worst_windowed = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto a = random_plane(32, 32, rng), b = random_plane(32, 32, rng);
    const auto p = random_mask(32, 32, 0.1 + 0.008 * i, rng), g = random_mask(32, 32, 0.5, rng);
    worst_exact = std::max({worst_exact, std::abs(psnr(a, b) - static_cast<double>(oracle::psnr(grid(a), grid(b)))),
                            std::abs(f_measure(p, g) - static_cast<double>(oracle::f_measure(ink(p), ink(g))))});
    worst_windowed = std::max({worst_windowed, std::abs(ssim(a, b) - static_cast<double>(oracle::ssim(grid(a), grid(b)))),
                               std::abs(drd(p, g) - static_cast<double>(oracle::drd(ink(p), ink(g))))});
  }
  const double t = seconds_since(t0);
  return {worst_exact <= kTolExact && worst_windowed <= kTolWindowed && t < kMetricSeconds,
          "100 pairs, max |psnr,F err| " + sci(worst_exact) + ", max |ssim,drd err| " +
              sci(worst_windowed) + ", " + fmt(t, 2) + " s"};
}

// Central differences of a loss over one input vector, in double.
template <typename F>
double grad_error(std::vector<double> x, const std::vector<double>& analytic, F loss) {
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double lp = loss(x);
    x[i] = x0 - h;
    const double lm = loss(x);
    x[i] = x0;
    const double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(std::abs(fd), 1e-12));
  }
  return worst;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  auto vec = [&] {
    std::vector<double> v(16);
    for (auto& x : v) x = u(rng);
    return v;
  };
  using S = std::span<const double>;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto real = vec(), fake = vec(), gt = vec(), gen = vec();
    std::vector<double> dr(16), df(16);
    adversarial_loss_D_grad<double>(S(real), S(fake), dr, df);
    worst = std::max(worst, grad_error(real, dr, [&](const auto& x) { return adversarial_loss_D<double>(S(x), S(fake)); }));
    worst = std::max(worst, grad_error(fake, df, [&](const auto& x) { return adversarial_loss_D<double>(S(real), S(x)); }));
    for (auto form : {AdversarialForm::non_saturating, AdversarialForm::saturating}) {
      adversarial_loss_G_grad<double>(S(fake), df, form);
      worst = std::max(worst, grad_error(fake, df, [&](const auto& x) { return adversarial_loss_G<double>(S(x), form); }));
    }
    pixel_log_loss_grad<double>(S(gt), S(gen), df);
    worst = std::max(worst, grad_error(gen, df, [&](const auto& x) { return pixel_log_loss<double>(S(gt), S(x)); }));
  }
  const double t = seconds_since(t0);
  return {worst < kTolGradRel && t < kGradSeconds,
          "4x4 maps, max relative error " + sci(worst) + ", " + fmt(t, 2) + " s"};
}

Outcome shapes() {
  std::mt19937_64 rng(3);
  const auto gen = build_generator(GeneratorConfig{}, 1);
  const auto disc = build_discriminator(DiscriminatorConfig{}, 2);
  const auto x = random_plane(256, 256, rng), y = random_plane(256, 256, rng);
  const auto out = generate(gen, x);
  bool ok = out.height() == 256 && out.width() == 256;
  for (float v : out.values()) ok = ok && v > 0.0f && v < 1.0f;
  const auto map = discriminate(disc, x, out);
  const auto map2 = discriminate(disc, x, y);
  ok = ok && map.values().size() == 256 && map2.values().size() == 256;
  for (float v : map.values()) ok = ok && v > 0.0f && v < 1.0f;
  for (float v : map2.values()) ok = ok && v > 0.0f && v < 1.0f;
  return {ok, "generator 256x256 -> " + std::to_string(out.height()) + "x" + std::to_string(out.width()) +
                  ", discriminator -> 16x16, all values in (0,1)"};
}

// ---------------------------------------------------------------------------
// Training runs

struct RunSummary {
  double first_pixel = 0.0, last_pixel = 0.0;
  double psnr_enhanced = 0.0, psnr_input = 0.0, ssim_enhanced = 0.0, ssim_input = 0.0;
  double seconds = 0.0;
};

void write_summary(const fs::path& p, const RunSummary& s) {
  std::ofstream os(p);
  os << "first_pixel_log = " << kv::format_double(s.first_pixel) << "\n"
     << "last_pixel_log = " << kv::format_double(s.last_pixel) << "\n"
     << "psnr_enhanced = " << kv::format_double(s.psnr_enhanced) << "\n"
     << "psnr_input = " << kv::format_double(s.psnr_input) << "\n"
     << "ssim_enhanced = " << kv::format_double(s.ssim_enhanced) << "\n"
     << "ssim_input = " << kv::format_double(s.ssim_input) << "\n"
     << "seconds = " << kv::format_double(s.seconds) << "\n";
}

RunSummary read_summary(const fs::path& p) {
  const auto doc = kv::parse_file(p);
  auto get = [&](const char* k) { return kv::to_double(k, doc.at(k)); };
  RunSummary s;
  s.first_pixel = get("first_pixel_log");
  s.last_pixel = get("last_pixel_log");
  s.psnr_enhanced = get("psnr_enhanced");
  s.psnr_input = get("psnr_input");
  s.ssim_enhanced = get("ssim_enhanced");
  s.ssim_input = get("ssim_input");
  s.seconds = get("seconds");
  return s;
}

struct Page {
  std::string stem;
  ImagePlane degraded, clean;
};

std::vector<Page> watermark_pages(int n, std::uint64_t page_seed, std::uint64_t mark_seed) {
  std::vector<Page> pages;
  for (int i = 0; i < n; ++i) {
    auto clean = degrade::synthesize_clean_page(kPatchSize, kPatchSize, sub_seed(page_seed, i));
    auto degraded = degrade::apply(clean, degrade::dense_watermark_preset(sub_seed(mark_seed, i)));
    char stem[32];
    std::snprintf(stem, sizeof stem, "page_%03d", i);
    pages.push_back({stem, std::move(degraded), std::move(clean)});
  }
  return pages;
}

// Trains on `train`, enhances `eval`, writes loss.tsv, model.ckpt,
// enhanced/*.png, report.csv and summary.txt under `dir`.
RunSummary train_and_evaluate(const fs::path& dir, TrainConfig cfg, const std::vector<Page>& train,
                              const std::vector<Page>& eval) {
  fs::remove_all(dir);
  fs::create_directories(dir / "enhanced");
  const auto t0 = std::chrono::steady_clock::now();
  PairedDataset data;
  for (const auto& p : train) append_image_pair(data, p.degraded, p.clean, p.stem, cfg.patch_stride);
  Trainer trainer(cfg, std::move(data));
  LossLog log(dir / "loss.tsv", cfg);
  RunSummary s;
  run_training(trainer, dir / "model.ckpt", log, [&](std::uint64_t step, const LossBreakdown& lb) {
    if (step == 1) s.first_pixel = lb.pixel_log;
    s.last_pixel = lb.pixel_log;
    if (step % 500 == 0)
      std::cerr << "  step " << step << " pixel_log " << lb.pixel_log << " (" << fmt(seconds_since(t0), 0) << " s)\n";
  });
  s.seconds = seconds_since(t0);

  std::vector<NamedPair> enhanced, inputs;
  for (const auto& p : eval) {
    // Scored on the written 8-bit images, exactly as the CLI would see them.
    save_png(dir / "enhanced" / (p.stem + ".png"), enhance(trainer.generator(), p.degraded));
    enhanced.push_back({p.stem, load_image(dir / "enhanced" / (p.stem + ".png")), p.clean});
    inputs.push_back({p.stem, p.degraded, p.clean});
  }
  const auto rep = evaluate_corpus(enhanced);
  const auto base = evaluate_corpus(inputs);
  {
    std::ofstream os(dir / "report.csv");
    write_report_csv(os, rep);
    std::ofstream ob(dir / "report_binary.csv");
    write_report_csv(ob, evaluate_corpus(enhanced, EvalOptions{0.5f}));
    std::ofstream oi(dir / "report_input.csv");
    write_report_csv(oi, base);
  }
  s.psnr_enhanced = rep.mean.psnr;
  s.ssim_enhanced = rep.mean.ssim;
  s.psnr_input = base.mean.psnr;
  s.ssim_input = base.mean.ssim;
  write_summary(dir / "summary.txt", s);
  return s;
}

TrainConfig overfit_config() {
  TrainConfig c;
  c.task = Task::watermark;
  c.lambda = 500.0;
  c.learning_rate = 1e-4;
  c.batch_size = 1;
  c.max_steps = kOverfitSteps;
  c.seed = 1;
  c.generator.depth = kOverfitDepth;
  c.generator.base_channels = kOverfitBase;
  c.discriminator.base_channels = kOverfitDiscBase;
  return c;
}

TrainConfig end_to_end_config(TrainMode mode) {
  TrainConfig c;
  c.task = Task::watermark;
  c.learning_rate = 1e-4;
  c.batch_size = kEndToEndBatch;
  c.max_steps = kEndToEndSteps;
  c.seed = 5;
  c.mode = mode;
  c.generator.depth = kEndToEndDepth;
  c.generator.base_channels = kEndToEndBase;
  c.discriminator.base_channels = kEndToEndDiscBase;
  return c;
}

RunSummary run_overfit(const fs::path& dir) {
  const auto pages = watermark_pages(kOverfitPairs, 42, 43);
  return train_and_evaluate(dir, overfit_config(), pages, pages);
}

RunSummary run_end_to_end(const fs::path& dir, TrainMode mode) {
  auto pages = watermark_pages(kTrainPairs + kHeldOutPairs, 52, 53);
  const std::vector<Page> train(pages.begin(), pages.begin() + kTrainPairs);
  const std::vector<Page> held(pages.begin() + kTrainPairs, pages.end());
  return train_and_evaluate(dir, end_to_end_config(mode), train, held);
}

Outcome overfit(const fs::path& work) {
  const auto s = run_overfit(work / "criterion4");
  const double ratio = s.first_pixel / s.last_pixel;
  return {s.psnr_enhanced > kOverfitPsnr && ratio >= kOverfitRatio && s.seconds <= kOverfitSeconds,
          "8 pairs, " + std::to_string(kOverfitSteps) + " steps: PSNR " + fmt(s.psnr_enhanced, 2) +
              " dB (input " + fmt(s.psnr_input, 2) + " dB), pixel_log " + fmt(s.first_pixel) + " -> " +
              fmt(s.last_pixel) + " (x" + fmt(ratio, 1) + "), " + fmt(s.seconds, 0) + " s"};
}

Outcome end_to_end(const fs::path& work) {
  const auto s = run_end_to_end(work / "criterion5", TrainMode::adversarial);
  const double gain = s.psnr_enhanced - s.psnr_input;
  return {gain >= kEndToEndGainDb,
          "200 train / 40 held out, " + std::to_string(kEndToEndSteps) + " steps: PSNR " + fmt(s.psnr_input, 2) +
              " -> " + fmt(s.psnr_enhanced, 2) + " dB (gain " + fmt(gain, 2) + " dB), report " +
              (work / "criterion5" / "report.csv").string()};
}

Outcome baselines_exact() {
  int otsu_mismatch = 0;
  for (int i = 0; i < 50; ++i) {
    std::mt19937_64 rng(900 + i);
    const int h = 16 + i % 17, w = 12 + (i * 5) % 29;
    std::vector<float> v(static_cast<std::size_t>(h) * w);
    // Bimodal, uniform and few-level histograms in turn.
    std::normal_distribution<double> lo(70, 12 + i % 9), hi(180, 20);
    std::uniform_int_distribution<int> any(0, 255), few(0, 4);
    for (auto& x : v) {
      int l = 0;
      switch (i % 3) {
        case 0: l = static_cast<int>(std::lround(std::bernoulli_distribution(0.35)(rng) ? lo(rng) : hi(rng))); break;
        case 1: l = any(rng); break;
        default: l = 40 + few(rng) * 37;
      }
      x = static_cast<float>(std::clamp(l, 0, 255) / 255.0);
    }
    const auto img = ImagePlane::from_values(h, w, std::move(v));
    otsu_mismatch += baselines::otsu_threshold(img) != oracle::otsu(levels_of(img));
  }
  double worst = 0.0;
  std::mt19937_64 rng(31);
  for (int win : {3, 15, 25}) {
    std::vector<float> v(40 * 37);
    std::uniform_int_distribution<int> any(0, 255);
    for (auto& x : v) x = static_cast<float>(any(rng) / 255.0);
    const auto img = ImagePlane::from_values(40, 37, std::move(v));
    const auto st = baselines::level_statistics(img, win);
    const auto lv = levels_of(img);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 37; ++x) {
        long double m, sd;
        oracle::local_stats(lv, 40, 37, win, y, x, m, sd);
        const std::size_t k = static_cast<std::size_t>(y) * 37 + x;
        worst = std::max({worst, std::abs(st.mean[k] - static_cast<double>(m)),
                          std::abs(st.stddev[k] - static_cast<double>(sd))});
      }
  }
  return {otsu_mismatch == 0 && worst <= kTolExact,
          "Otsu mismatches " + std::to_string(otsu_mismatch) + "/50, local statistics max error " +
              sci(worst)};
}

Outcome patch_pipeline() {
  std::mt19937_64 rng(2024);
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int patch = std::uniform_int_distribution<int>(1, 48)(rng);
    const int stride = std::uniform_int_distribution<int>(1, patch)(rng);
    const int h = std::uniform_int_distribution<int>(1, 120)(rng);
    const int w = std::uniform_int_distribution<int>(1, 120)(rng);
    const auto img = random_plane(h, w, rng);
    failures += !(stitch_patches(extract_patches(img, patch, stride)) == img);
  }
  int const_failures = 0;
  for (float c : {0.0f, 0.3f, 0.7f, 1.0f}) {
    const ImagePlane img(301, 177, c);
    const_failures += !(stitch_patches(extract_patches(img, kPatchSize, 100)) == img);
  }
  return {failures == 0 && const_failures == 0,
          "round trip failures " + std::to_string(failures) + "/200, constant-image failures " +
              std::to_string(const_failures) + "/4"};
}

// Byte comparison of every regular file present in either tree, except the
// timing-bearing summary.
std::vector<std::string> tree_differences(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const auto& root : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), root).string());
  std::vector<std::string> diff;
  for (const auto& n : names) {
    if (n == "summary.txt") continue;
    if (!fs::exists(a / n) || !fs::exists(b / n) || slurp(a / n) != slurp(b / n)) diff.push_back(n);
  }
  return diff;
}

Outcome determinism(const fs::path& work) {
  if (!fs::exists(work / "criterion4" / "summary.txt")) run_overfit(work / "criterion4");
  if (!fs::exists(work / "criterion5" / "summary.txt")) run_end_to_end(work / "criterion5", TrainMode::adversarial);
  run_overfit(work / "criterion8" / "overfit");
  run_end_to_end(work / "criterion8" / "end_to_end", TrainMode::adversarial);
  auto d4 = tree_differences(work / "criterion4", work / "criterion8" / "overfit");
  auto d5 = tree_differences(work / "criterion5", work / "criterion8" / "end_to_end");
  std::string detail = "overfit run: " + std::to_string(d4.size()) + " differing files, end-to-end run: " +
                       std::to_string(d5.size()) + " differing files (loss logs, checkpoints, images, reports)";
  for (const auto& n : d4) detail += "; overfit/" + n;
  for (const auto& n : d5) detail += "; end_to_end/" + n;
  return {d4.empty() && d5.empty(), detail};
}

Outcome ablation(const fs::path& work) {
  if (!fs::exists(work / "criterion5" / "summary.txt")) run_end_to_end(work / "criterion5", TrainMode::adversarial);
  const auto full = read_summary(work / "criterion5" / "summary.txt");
  const auto gen_only = run_end_to_end(work / "criterion9", TrainMode::generator_only);
  {
    std::ofstream os(work / "criterion9" / "ablation.tsv");
    os << "model\tpsnr\tssim\n"
       << "input\t" << fmt(full.psnr_input) << "\t" << fmt(full.ssim_input) << "\n"
       << "generator_only\t" << fmt(gen_only.psnr_enhanced) << "\t" << fmt(gen_only.ssim_enhanced) << "\n"
       << "degan\t" << fmt(full.psnr_enhanced) << "\t" << fmt(full.ssim_enhanced) << "\n";
  }
  return {full.psnr_enhanced >= gen_only.psnr_enhanced,
          "held-out PSNR/SSIM: generator-only " + fmt(gen_only.psnr_enhanced, 2) + " dB / " +
              fmt(gen_only.ssim_enhanced) + ", adversarial " + fmt(full.psnr_enhanced, 2) + " dB / " +
              fmt(full.ssim_enhanced)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"degan acceptance checks"};
  int criterion = 0;
  fs::path work = "acceptance";
  app.add_option("--criterion", criterion, "Criterion number")->required()->check(CLI::Range(1, 9));
  app.add_option("--workdir", work, "Directory for training artefacts")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::function<Outcome()>> checks = {
      metric_oracle, gradients, shapes,
      [&] { return overfit(work); }, [&] { return end_to_end(work); }, baselines_exact,
      patch_pipeline, [&] { return determinism(work); }, [&] { return ablation(work); }};
  Outcome o;
  try {
    o = checks.at(static_cast<std::size_t>(criterion - 1))();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::cout << "criterion " << criterion << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  return o.pass ? 0 : 1;
}
