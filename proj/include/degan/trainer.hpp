// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "degan/checkpoint.hpp"
#include "degan/degrade.hpp"
#include "degan/discriminator.hpp"
#include "degan/error.hpp"
#include "degan/generator.hpp"
#include "degan/image.hpp"
#include "degan/io.hpp"
#include "degan/keyvalue.hpp"
#include "degan/nn/adam.hpp"
#include "degan/objective.hpp"
#include "degan/patches.hpp"
#include "degan/seed.hpp"

namespace degan {

enum class Task { cleanup, binarize, watermark, deblur };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::cleanup: return "cleanup";
    case Task::binarize: return "binarize";
    case Task::watermark: return "watermark";
    case Task::deblur: return "deblur";
  }
  return "?";
}

inline Task task_from_string(const std::string& s) {
  for (Task t : {Task::cleanup, Task::binarize, Task::watermark, Task::deblur})
    if (s == to_string(t)) return t;
  throw ConfigError("unknown task '" + s + "' (expected cleanup, binarize, watermark or deblur)");
}

/// Pixel-loss weight per task.
inline double default_lambda(Task t) {
  switch (t) {
    case Task::binarize:
    case Task::watermark: return 500.0;
    case Task::cleanup:
    case Task::deblur: return 100.0;
  }
  return 100.0;
}

/// adversarial: discriminator and generator alternate. generator_only: pixel
/// loss alone, no discriminator (plain U-net baseline).
enum class TrainMode { adversarial, generator_only };

inline const char* to_string(TrainMode m) {
  return m == TrainMode::adversarial ? "adversarial" : "generator_only";
}

inline TrainMode mode_from_string(const std::string& s) {
  if (s == "adversarial") return TrainMode::adversarial;
  if (s == "generator_only") return TrainMode::generator_only;
  throw ConfigError("unknown mode '" + s + "' (expected adversarial or generator_only)");
}

inline AdversarialForm form_from_string(const std::string& s) {
  if (s == "non_saturating") return AdversarialForm::non_saturating;
  if (s == "saturating") return AdversarialForm::saturating;
  throw ConfigError("unknown adversarial_form '" + s + "'");
}

struct TrainConfig {
  Task task = Task::cleanup;
  std::optional<double> lambda;  // unset: default_lambda(task)
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 8;
  std::uint64_t max_steps = 1000;
  std::uint64_t seed = 0;
  int patch_stride = 128;
  std::uint64_t checkpoint_every = 0;  // 0: only at the end
  AdversarialForm adversarial_form = AdversarialForm::non_saturating;
  TrainMode mode = TrainMode::adversarial;
  double val_fraction = 0.0;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;

  double effective_lambda() const { return lambda.value_or(default_lambda(task)); }

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(effective_lambda() > 0.0)) throw ConfigError("lambda must be > 0");
    if (patch_stride < 1 || patch_stride > kPatchSize)
      throw ConfigError("patch_stride must be in [1, " + std::to_string(kPatchSize) + "]");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
      throw ConfigError("val_fraction must be in [0, 1)");
    nn::AdamConfig{learning_rate, beta1, beta2}.validate();
    generator.validate();
    discriminator.validate();
  }

  nn::AdamConfig adam() const { return {learning_rate, beta1, beta2}; }
};

/// Overrides `base` with the keys of a flat key/value document.
inline TrainConfig apply_document(TrainConfig c, const kv::Document& doc) {
  for (const auto& [k, v] : doc) {
    if (k == "task") c.task = task_from_string(v);
    else if (k == "lambda") c.lambda = kv::to_double(k, v);
    else if (k == "learning_rate") c.learning_rate = kv::to_double(k, v);
    else if (k == "beta1") c.beta1 = kv::to_double(k, v);
    else if (k == "beta2") c.beta2 = kv::to_double(k, v);
    else if (k == "batch_size") c.batch_size = static_cast<int>(kv::to_int(k, v));
    else if (k == "max_steps") c.max_steps = kv::to_uint(k, v);
    else if (k == "seed") c.seed = kv::to_uint(k, v);
    else if (k == "patch_stride") c.patch_stride = static_cast<int>(kv::to_int(k, v));
    else if (k == "checkpoint_every") c.checkpoint_every = kv::to_uint(k, v);
    else if (k == "adversarial_form") c.adversarial_form = form_from_string(v);
    else if (k == "mode") c.mode = mode_from_string(v);
    else if (k == "val_fraction") c.val_fraction = kv::to_double(k, v);
    else if (k == "generator.depth") c.generator.depth = static_cast<int>(kv::to_int(k, v));
    else if (k == "generator.base_channels") c.generator.base_channels = static_cast<int>(kv::to_int(k, v));
    else if (k == "generator.kernel_size") c.generator.kernel_size = static_cast<int>(kv::to_int(k, v));
    else if (k == "discriminator.base_channels") c.discriminator.base_channels = static_cast<int>(kv::to_int(k, v));
    else if (k == "discriminator.kernel_size") c.discriminator.kernel_size = static_cast<int>(kv::to_int(k, v));
    else if (k == "discriminator.leaky_slope") c.discriminator.leaky_slope = static_cast<float>(kv::to_double(k, v));
    else throw ConfigError("unknown training config key '" + k + "'");
  }
  return c;
}

inline std::string to_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "task = " << to_string(c.task) << '\n';
  if (c.lambda) os << "lambda = " << kv::format_double(*c.lambda) << '\n';
  os << "learning_rate = " << kv::format_double(c.learning_rate) << '\n'
     << "beta1 = " << kv::format_double(c.beta1) << '\n'
     << "beta2 = " << kv::format_double(c.beta2) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "max_steps = " << c.max_steps << '\n'
     << "seed = " << c.seed << '\n'
     << "patch_stride = " << c.patch_stride << '\n'
     << "checkpoint_every = " << c.checkpoint_every << '\n'
     << "adversarial_form = " << to_string(c.adversarial_form) << '\n'
     << "mode = " << to_string(c.mode) << '\n'
     << "val_fraction = " << kv::format_double(c.val_fraction) << '\n'
     << "generator.depth = " << c.generator.depth << '\n'
     << "generator.base_channels = " << c.generator.base_channels << '\n'
     << "generator.kernel_size = " << c.generator.kernel_size << '\n'
     << "discriminator.base_channels = " << c.discriminator.base_channels << '\n'
     << "discriminator.kernel_size = " << c.discriminator.kernel_size << '\n'
     << "discriminator.leaky_slope = " << kv::format_double(c.discriminator.leaky_slope) << '\n';
  return os.str();
}

inline TrainConfig parse_train_config(const std::string& text, const std::string& origin = "<config>") {
  std::istringstream is(text);
  return apply_document(TrainConfig{}, kv::parse(is, origin));
}

// ---------------------------------------------------------------------------
// Data

struct PatchPair {
  ImagePlane degraded;
  ImagePlane clean;
  std::string stem;
  int row = 0, col = 0;  // patch origin in the source image
};

struct PairedDataset {
  std::vector<PatchPair> pairs;
  std::vector<std::string> warnings;  // unpaired stems and similar

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

/// Patches one (degraded, clean) image pair with identical offsets.
inline void append_image_pair(PairedDataset& ds, const ImagePlane& degraded, const ImagePlane& clean,
                              const std::string& stem, int stride) {
  if (!degraded.same_shape(clean))
    throw ValidationError("pair '" + stem + "': degraded is " + std::to_string(degraded.height()) +
                          "x" + std::to_string(degraded.width()) + " but clean is " +
                          std::to_string(clean.height()) + "x" + std::to_string(clean.width()));
  const auto pd = extract_patches(degraded, kPatchSize, stride);
  auto pc = extract_patches(clean, kPatchSize, stride);
  std::size_t i = 0;
  for (int r : pd.origin_rows)
    for (int c : pd.origin_cols) {
      ds.pairs.push_back({pd.patches[i], std::move(pc.patches[i]), stem, r, c});
      ++i;
    }
}

/// Pairs images by file stem and patches each pair identically. Stems present
/// in only one directory are skipped with a warning.
inline PairedDataset ingest_paired_dirs(const std::filesystem::path& degraded_dir,
                                        const std::filesystem::path& clean_dir,
                                        const TrainConfig& cfg) {
  auto by_stem = [](const std::filesystem::path& dir, std::vector<std::string>& warnings) {
    std::map<std::string, std::filesystem::path> m;
    for (const auto& p : degrade::list_images(dir)) {
      const auto stem = p.stem().string();
      if (!m.emplace(stem, p).second)
        warnings.push_back("duplicate stem '" + stem + "' in " + dir.string() + ", using " +
                           m[stem].filename().string());
    }
    return m;
  };
  PairedDataset ds;
  std::map<std::string, std::filesystem::path> deg, cln;
  try {
    deg = by_stem(degraded_dir, ds.warnings);
    cln = by_stem(clean_dir, ds.warnings);
  } catch (const IoError& e) {
    throw DatasetError(e.what());
  }
  for (const auto& [stem, path] : deg) {
    auto it = cln.find(stem);
    if (it == cln.end()) {
      ds.warnings.push_back("stem '" + stem + "' has no clean counterpart; skipped");
      continue;
    }
    append_image_pair(ds, load_image(path), load_image(it->second), stem, cfg.patch_stride);
  }
  for (const auto& [stem, path] : cln)
    if (!deg.count(stem))
      ds.warnings.push_back("stem '" + stem + "' has no degraded counterpart; skipped");
  if (ds.pairs.empty())
    throw DatasetError("no paired images between '" + degraded_dir.string() + "' and '" +
                       clean_dir.string() + "'");
  return ds;
}

/// Splits pair indices into (train, validation) by source stem, so overlapping
/// patches of one image never straddle the split. Deterministic in seed.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    const PairedDataset& ds, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> train, val;
  if (fraction <= 0.0) {
    for (std::size_t i = 0; i < ds.size(); ++i) train.push_back(i);
    return {train, val};
  }
  std::vector<std::string> stems;
  for (const auto& p : ds.pairs)
    if (stems.empty() || stems.back() != p.stem) stems.push_back(p.stem);
  std::sort(stems.begin(), stems.end());
  stems.erase(std::unique(stems.begin(), stems.end()), stems.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = stems.size(); i > 1; --i) std::swap(stems[i - 1], stems[rng() % i]);
  std::size_t nval = static_cast<std::size_t>(std::floor(fraction * stems.size()));
  if (nval == 0 && stems.size() > 1) nval = 1;
  if (nval >= stems.size())
    throw DatasetError("validation split leaves no training images");
  const std::vector<std::string> held(stems.begin(), stems.begin() + nval);
  for (std::size_t i = 0; i < ds.size(); ++i)
    (std::find(held.begin(), held.end(), ds.pairs[i].stem) != held.end() ? val : train).push_back(i);
  return {train, val};
}

// ---------------------------------------------------------------------------
// Loss log

inline std::filesystem::path loss_log_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".loss.tsv";
  return p;
}

inline constexpr const char* kLossLogColumns = "step\tadversarial_D\tadversarial_G\tpixel_log\tcombined_G";

/// One tab-separated line per step, preceded by '#' header lines.
class LossLog {
public:
  LossLog() = default;

  /// Starts a fresh log, or when `resume_step` is set keeps the header and
  /// every record up to and including that step from `source` (default: the
  /// log being written).
  LossLog(const std::filesystem::path& path, const TrainConfig& cfg,
          std::optional<std::uint64_t> resume_step = std::nullopt,
          const std::filesystem::path& source = {})
      : path_(path) {
    std::vector<std::string> keep;
    if (resume_step) {
      std::ifstream in(source.empty() ? path : source);
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        if (line[0] == '#' || line.rfind("step\t", 0) == 0) {
          keep.push_back(line);
          continue;
        }
        std::uint64_t step = 0;
        if (std::sscanf(line.c_str(), "%llu", reinterpret_cast<unsigned long long*>(&step)) == 1 &&
            step <= *resume_step)
          keep.push_back(line);
      }
    }
    if (keep.empty()) keep = header(cfg);
    if (path.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(path.parent_path(), ec);
    }
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot write loss log '" + path.string() + "'");
    for (const auto& l : keep) out_ << l << '\n';
    out_.flush();
  }

  static std::vector<std::string> header(const TrainConfig& cfg) {
    return {"# degan loss log",
            "# task = " + std::string(to_string(cfg.task)),
            "# lambda = " + kv::format_double(cfg.effective_lambda()),
            "# mode = " + std::string(to_string(cfg.mode)),
            "# adversarial_form = " + std::string(to_string(cfg.adversarial_form)),
            "# seed = " + std::to_string(cfg.seed),
            kLossLogColumns};
  }

  static std::string format(std::uint64_t step, const LossBreakdown& lb) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%llu\t%.9g\t%.9g\t%.9g\t%.9g",
                  static_cast<unsigned long long>(step), lb.adversarial_D, lb.adversarial_G,
                  lb.pixel_log, lb.combined_G);
    return buf;
  }

  void append(std::uint64_t step, const LossBreakdown& lb) {
    out_ << format(step, lb) << '\n';
  }
  void flush() { out_.flush(); }
  const std::filesystem::path& path() const noexcept { return path_; }

private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Trainer

/// Owns both networks, their optimisers and the step counter. Batch
/// composition depends only on (seed, step), so a run restored from a
/// checkpoint at step k continues exactly like an uninterrupted one.
class Trainer {
public:
  using Gen = Generator<float>;
  using Disc = Discriminator<float>;

  Trainer(TrainConfig cfg, PairedDataset data) : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.validate();
    if (data_.empty()) throw DatasetError("training set is empty");
    gen_ = Gen(cfg_.generator, sub_seed(cfg_.seed, 1));
    disc_ = Disc(cfg_.discriminator, sub_seed(cfg_.seed, 2));
    adam_g_ = nn::Adam<float>(cfg_.adam(), gen_.params());
    adam_d_ = nn::Adam<float>(cfg_.adam(), disc_.params());
    std::tie(train_, val_) = split_validation(data_, cfg_.val_fraction, sub_seed(cfg_.seed, 4));
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  TrainConfig& mutable_config() noexcept { return cfg_; }
  std::uint64_t step() const noexcept { return step_; }
  Gen& generator() noexcept { return gen_; }
  Disc& discriminator() noexcept { return disc_; }
  const Gen& generator() const noexcept { return gen_; }
  const Disc& discriminator() const noexcept { return disc_; }
  const PairedDataset& data() const noexcept { return data_; }
  const std::vector<std::size_t>& train_indices() const noexcept { return train_; }
  const std::vector<std::size_t>& val_indices() const noexcept { return val_; }

  /// Called with "discriminator" / "generator" right after each optimiser update.
  void set_update_observer(std::function<void(const char*)> f) { observer_ = std::move(f); }

  /// Dataset indices of the batch used by step `step` (0-based). Positions
  /// step*B .. step*B+B-1 walk through per-epoch permutations of the training set.
  std::vector<std::size_t> batch_for_step(std::uint64_t step) const {
    const std::size_t n = train_.size();
    const std::uint64_t b = static_cast<std::uint64_t>(cfg_.batch_size);
    std::vector<std::size_t> out;
    for (std::uint64_t pos = step * b; pos < (step + 1) * b; ++pos) {
      const std::uint64_t epoch = pos / n;
      out.push_back(train_[permutation(epoch)[pos % n]]);
    }
    return out;
  }

  LossBreakdown train_step() {
    auto lb = train_step(batch_for_step(step_));
    return lb;
  }

  /// One discriminator update followed by one generator update (generator
  /// only in generator_only mode). Advances the step counter.
  LossBreakdown train_step(const std::vector<std::size_t>& batch) {
    if (batch.empty()) throw ValidationError("train_step: empty batch");
    auto [x, gt] = make_batch(batch);
    typename Gen::Cache gc;
    const nn::Tensor<float> y = gen_.forward(x, &gc);
    const double lambda = cfg_.effective_lambda();

    LossBreakdown lb;
    lb.lambda = lambda;
    lb.pixel_log = pixel_log_loss<float>(gt.span(), y.span());
    check_finite(lb.pixel_log, "pixel_log", batch);

    nn::Tensor<float> dz(y.n(), 1, y.h(), y.w());
    pixel_log_loss_logit_grad<float>(gt.span(), y.span(), dz.span());
    for (auto& v : dz.span()) v *= static_cast<float>(lambda);

    if (cfg_.mode == TrainMode::adversarial) {
      const auto fake_pair = nn::concat_channels(x, y);
      {
        typename Disc::Cache cr, cf;
        const auto real = disc_.forward(nn::concat_channels(x, gt), &cr);
        const auto fake = disc_.forward(fake_pair, &cf);
        lb.adversarial_D = adversarial_loss_D<float>(real.span(), fake.span());
        check_finite(lb.adversarial_D, "adversarial_D", batch);
        nn::Tensor<float> dr(real.n(), real.c(), real.h(), real.w());
        nn::Tensor<float> df(fake.n(), fake.c(), fake.h(), fake.w());
        adversarial_loss_D_logit_grad<float>(real.span(), fake.span(), dr.span(), df.span());
        disc_.zero_grad();
        disc_.backward_logits(cr, std::move(dr), false);
        disc_.backward_logits(cf, std::move(df), false);
        adam_d_.step(disc_.params());
        notify("discriminator");
      }
      typename Disc::Cache c2;
      const auto fake = disc_.forward(fake_pair, &c2);
      lb.adversarial_G = adversarial_loss_G<float>(fake.span(), cfg_.adversarial_form);
      check_finite(lb.adversarial_G, "adversarial_G", batch);
      nn::Tensor<float> dm(fake.n(), fake.c(), fake.h(), fake.w());
      adversarial_loss_G_logit_grad<float>(fake.span(), dm.span(), cfg_.adversarial_form);
      const auto dpair = disc_.backward_logits(c2, std::move(dm), true);
      // Gradient reaching the candidate channel, through the output sigmoid.
      const auto dcand = nn::split_channels(dpair, 1).second;
      auto d = dz.span();
      const auto g = dcand.span();
      const auto p = y.span();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * p[i] * (1.0f - p[i]);
    }
    lb.combined_G = lb.adversarial_G + lambda * lb.pixel_log;
    check_finite(lb.combined_G, "combined_G", batch);

    gen_.zero_grad();
    gen_.backward_logits(gc, dz);
    adam_g_.step(gen_.params());
    notify("generator");
    ++step_;
    return lb;
  }

  /// Mean pixel_log over the validation patches (NaN when there are none).
  double validation_pixel_loss() const {
    if (val_.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (std::size_t i : val_) {
      auto [x, gt] = make_batch({i});
      const auto y = gen_.forward(x);
      s += pixel_log_loss<float>(gt.span(), y.span());
    }
    return s / val_.size();
  }

  // -- checkpoints ----------------------------------------------------------

  CheckpointData to_checkpoint() const {
    CheckpointData ck;
    ck.meta["generator"] = config_json(cfg_.generator);
    ck.meta["discriminator"] = config_json(cfg_.discriminator);
    ck.meta["train_config"] = to_text(cfg_);
    ck.meta["step"] = step_;
    ck.meta["adam_steps"] = {adam_g_.steps(), adam_d_.steps()};
    auto& g = const_cast<Gen&>(gen_);
    auto& d = const_cast<Disc&>(disc_);
    append_params(ck, "generator", g);
    append_params(ck, "discriminator", d);
    append_moments(ck, "adam.generator", g, adam_g_);
    append_moments(ck, "adam.discriminator", d, adam_d_);
    return ck;
  }

  void save(const std::filesystem::path& path) const { write_checkpoint(path, to_checkpoint()); }

  /// Restores networks, optimiser state and step. Architecture must match
  /// this trainer's configuration. On failure nothing is modified.
  void restore(const CheckpointData& ck) {
    Gen g = gen_;
    Disc d = disc_;
    nn::Adam<float> ag = adam_g_, ad = adam_d_;
    std::uint64_t step = 0;
    try {
      if (generator_config_from_json(ck.meta.at("generator")) != cfg_.generator ||
          discriminator_config_from_json(ck.meta.at("discriminator")) != cfg_.discriminator)
        throw IncompatibleCheckpoint("checkpoint architecture differs from the configuration");
      step = ck.meta.at("step").get<std::uint64_t>();
      const auto t = ck.meta.at("adam_steps").get<std::vector<std::uint64_t>>();
      if (t.size() != 2) throw IncompatibleCheckpoint("checkpoint has malformed optimiser state");
      ag.set_steps(t[0]);
      ad.set_steps(t[1]);
    } catch (const nlohmann::json::exception& e) {
      throw IncompatibleCheckpoint(std::string("checkpoint metadata: ") + e.what());
    }
    restore_params(ck, "generator", g);
    restore_params(ck, "discriminator", d);
    restore_moments(ck, "adam.generator", g, ag);
    restore_moments(ck, "adam.discriminator", d, ad);
    gen_ = std::move(g);
    disc_ = std::move(d);
    adam_g_ = std::move(ag);
    adam_d_ = std::move(ad);
    step_ = step;
  }

  /// Training configuration stored in a checkpoint.
  static TrainConfig checkpoint_config(const CheckpointData& ck) {
    try {
      return parse_train_config(ck.meta.at("train_config").get<std::string>(), "checkpoint");
    } catch (const nlohmann::json::exception& e) {
      throw IncompatibleCheckpoint(std::string("checkpoint has no training configuration: ") +
                                   e.what());
    }
  }

private:
  std::pair<nn::Tensor<float>, nn::Tensor<float>> make_batch(const std::vector<std::size_t>& idx) const {
    const int n = static_cast<int>(idx.size());
    nn::Tensor<float> x(n, 1, kPatchSize, kPatchSize), gt(n, 1, kPatchSize, kPatchSize);
    for (int i = 0; i < n; ++i) {
      const auto& p = data_.pairs.at(idx[i]);
      std::copy(p.degraded.values().begin(), p.degraded.values().end(), x.sample(i));
      std::copy(p.clean.values().begin(), p.clean.values().end(), gt.sample(i));
    }
    return {std::move(x), std::move(gt)};
  }

  const std::vector<std::size_t>& permutation(std::uint64_t epoch) const {
    if (!perm_epoch_ || *perm_epoch_ != epoch) {
      perm_.resize(train_.size());
      for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
      std::mt19937_64 rng(sub_seed(sub_seed(cfg_.seed, 3), epoch));
      for (std::size_t i = perm_.size(); i > 1; --i) std::swap(perm_[i - 1], perm_[rng() % i]);
      perm_epoch_ = epoch;
    }
    return perm_;
  }

  void check_finite(double v, const char* what, const std::vector<std::size_t>& batch) const {
    if (std::isfinite(v)) return;
    std::string msg = std::string("non-finite ") + what + " at step " + std::to_string(step_ + 1) +
                      "; batch:";
    for (std::size_t i : batch) {
      const auto& p = data_.pairs[i];
      msg += " " + p.stem + "@" + std::to_string(p.row) + "," + std::to_string(p.col);
    }
    throw TrainingDiverged(msg);
  }

  void notify(const char* what) {
    if (observer_) observer_(what);
  }

  template <typename Net>
  static void append_moments(CheckpointData& ck, const std::string& section, Net& net,
                             const nn::Adam<float>& opt) {
    const auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.arrays.push_back({section + ".m", params[i].name, params[i].shape, opt.first_moments()[i]});
      ck.arrays.push_back({section + ".v", params[i].name, params[i].shape, opt.second_moments()[i]});
    }
  }

  template <typename Net>
  static void restore_moments(const CheckpointData& ck, const std::string& section, Net& net,
                              nn::Adam<float>& opt) {
    const auto params = net.params();
    std::vector<std::vector<float>> m(params.size()), v(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto* a = ck.find(section + ".m", params[i].name);
      const auto* b = ck.find(section + ".v", params[i].name);
      if (!a || !b || a->data.size() != params[i].value.size() ||
          b->data.size() != params[i].value.size())
        throw IncompatibleCheckpoint("checkpoint optimiser state for '" + params[i].name +
                                     "' is missing or mis-shaped");
      m[i] = a->data;
      v[i] = b->data;
    }
    opt.first_moments() = std::move(m);
    opt.second_moments() = std::move(v);
  }

  TrainConfig cfg_;
  PairedDataset data_;
  Gen gen_;
  Disc disc_;
  nn::Adam<float> adam_g_, adam_d_;
  std::uint64_t step_ = 0;
  std::vector<std::size_t> train_, val_;
  std::function<void(const char*)> observer_;
  mutable std::vector<std::size_t> perm_;
  mutable std::optional<std::uint64_t> perm_epoch_;
};

/// Runs `trainer` up to cfg.max_steps, logging every step and checkpointing
/// every cfg.checkpoint_every steps and at the end. `progress` (optional) sees
/// every step.
inline void run_training(Trainer& trainer, const std::filesystem::path& checkpoint, LossLog& log,
                         const std::function<void(std::uint64_t, const LossBreakdown&)>& progress = {}) {
  const auto& cfg = trainer.config();
  while (trainer.step() < cfg.max_steps) {
    const LossBreakdown lb = trainer.train_step();
    log.append(trainer.step(), lb);
    if (progress) progress(trainer.step(), lb);
    if (cfg.checkpoint_every > 0 && trainer.step() % cfg.checkpoint_every == 0 &&
        trainer.step() < cfg.max_steps) {
      log.flush();
      trainer.save(checkpoint);
    }
  }
  log.flush();
  trainer.save(checkpoint);
}

// ---------------------------------------------------------------------------
// Inference

/// Enhances an image of any size: patches at `stride`, runs the generator on
/// every patch and overlap-averages the outputs.
template <typename T>
ImagePlane enhance(const Generator<T>& gen, const ImagePlane& img, int stride = kPatchSize / 2) {
  auto ps = extract_patches(img, kPatchSize, stride);
  for (auto& p : ps.patches) p = generate(gen, p);
  return stitch_patches(ps);
}

}  // namespace degan
