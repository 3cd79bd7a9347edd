// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "degan/degan.hpp"
#include "helpers.hpp"

using namespace degan;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

Result run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(DEGAN_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const char* kSmallNet = "--gen-depth 2 --gen-base 2 --disc-base 2 --batch-size 1 --log-every 0";

// Clean pages plus a 4-pair watermark corpus under root/corpus.
void make_corpus(const fs::path& root) {
  ASSERT_EQ(run("pages --out " + q(root / "pages") + " --count 2 --height 256 --width 256 --seed 3").code, 0);
  ASSERT_EQ(run("synthesize --clean-dir " + q(root / "pages") + " --out " + q(root / "corpus") +
                " --count 4 --seed 9").code, 0);
}

}  // namespace

TEST(Cli, HelpListsCommands) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* c : {"synthesize", "train", "enhance", "evaluate", "binarize-baseline"})
    EXPECT_NE(r.out.find(c), std::string::npos) << c;
  EXPECT_EQ(run("train --help").code, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synthesize --out /tmp/x --count 1").code, 2);  // missing --clean-dir
  EXPECT_EQ(run("evaluate --pred-dir /tmp").code, 2);
}

TEST(Cli, SynthesizeWritesCorpusAndIsDeterministic) {
  const auto root = testutil::fresh_dir("cli");
  make_corpus(root);
  EXPECT_TRUE(fs::exists(root / "corpus" / "manifest.tsv"));
  EXPECT_EQ(degrade::list_images(root / "corpus" / "degraded").size(), 4u);
  ASSERT_EQ(run("synthesize --clean-dir " + q(root / "pages") + " --out " + q(root / "again") + " --count 4 --seed 9").code, 0);
  for (const auto& p : degrade::list_images(root / "corpus" / "degraded"))
    EXPECT_EQ(slurp(p), slurp(root / "again" / "degraded" / p.filename()));
  EXPECT_EQ(slurp(root / "corpus" / "manifest.tsv"), slurp(root / "again" / "manifest.tsv"));
  ASSERT_EQ(run("synthesize --clean-dir " + q(root / "pages") + " --out " + q(root / "regen") +
                " --count 0 --from-manifest " + q(root / "corpus" / "manifest.tsv")).code, 0);
  for (const auto& p : degrade::list_images(root / "corpus" / "degraded"))
    EXPECT_EQ(slurp(p), slurp(root / "regen" / "degraded" / p.filename()));
}

TEST(Cli, SynthesizeCountZeroAndBadSpec) {
  const auto root = testutil::fresh_dir("cli");
  const auto r0 = run("synthesize --clean-dir " + q(root) + " --out " + q(root / "o") + " --count 0");
  EXPECT_EQ(r0.code, 0) << r0.out;
  EXPECT_TRUE(fs::exists(root / "o" / "manifest.tsv"));
  EXPECT_FALSE(fs::exists(root / "o" / "degraded"));
  const auto bad = run("synthesize --clean-dir " + q(root) + " --out " + q(root / "o") +
                       " --count 1 --spec " + q(root / "no_such.spec"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("no_such.spec"), std::string::npos) << bad.out;
}

TEST(Cli, SynthesizeFromSpecFile) {
  const auto root = testutil::fresh_dir("cli");
  ASSERT_EQ(run("pages --out " + q(root / "pages") + " --count 1 --height 64 --width 64").code, 0);
  std::ofstream(root / "blur.spec") << "seed = 5\nkinds = blur\nblur.sigma = 1.0, 1.0\n";
  const auto r = run("synthesize --clean-dir " + q(root / "pages") + " --out " + q(root / "o") +
                     " --count 1 --spec " + q(root / "blur.spec"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto m = degrade::read_manifest(root / "o" / "manifest.tsv");
  EXPECT_NE(m.records.at(0).realized.find("blur(sigma=1)"), std::string::npos);
}

TEST(Cli, TrainEnhanceEvaluateRoundTrip) {
  const auto root = testutil::fresh_dir("cli");
  make_corpus(root);
  // One orphan stem: warned and skipped.
  fs::copy_file(root / "pages" / "page_00000.png", root / "corpus" / "degraded" / "orphan.png");
  const auto ck = root / "model.ckpt";
  const auto tr = run("train --degraded-dir " + q(root / "corpus" / "degraded") + " --clean-dir " +
                      q(root / "corpus" / "clean") + " --out-checkpoint " + q(ck) +
                      " --task watermark --max-steps 3 --seed 1 " + kSmallNet);
  ASSERT_EQ(tr.code, 0) << tr.out;
  EXPECT_NE(tr.out.find("orphan"), std::string::npos);
  const auto log = slurp(loss_log_path(ck));
  EXPECT_NE(log.find("# lambda = 500\n"), std::string::npos) << log;
  EXPECT_NE(log.find("\n3\t"), std::string::npos);

  const auto en = run("enhance --checkpoint " + q(ck) + " --input " + q(root / "corpus" / "degraded") +
                      " --output " + q(root / "enhanced") + " --side-by-side " + q(root / "sbs"));
  ASSERT_EQ(en.code, 0) << en.out;
  const auto in0 = load_image(root / "corpus" / "degraded" / "page_00000_00000.png");
  const auto out0 = load_image(root / "enhanced" / "page_00000_00000.png");
  EXPECT_EQ(out0.height(), in0.height());
  EXPECT_EQ(out0.width(), in0.width());
  EXPECT_EQ(load_image(root / "sbs" / "page_00000_00000.png").width(), 2 * in0.width());

  const auto bin = run("enhance --checkpoint " + q(ck) + " --input " +
                       q(root / "corpus" / "degraded" / "page_00001_00001.png") + " --output " +
                       q(root / "bin.png") + " --binarize --threshold 0.5");
  ASSERT_EQ(bin.code, 0) << bin.out;
  for (float v : load_image(root / "bin.png").values()) ASSERT_TRUE(v == 0.0f || v == 1.0f);

  fs::remove(root / "corpus" / "degraded" / "orphan.png");
  fs::remove(root / "enhanced" / "orphan.png");
  const auto ev = run("evaluate --pred-dir " + q(root / "enhanced") + " --gt-dir " +
                      q(root / "corpus" / "clean") + " --binary --report " + q(root / "report.csv"));
  ASSERT_EQ(ev.code, 0) << ev.out;
  EXPECT_NE(ev.out.find("PSNR"), std::string::npos);
  const auto csv = slurp(root / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "image,psnr,ssim,f_measure,f_ps,drd");
}

TEST(Cli, EvaluateIdenticalCorpusAndZeroPairs) {
  const auto root = testutil::fresh_dir("cli");
  make_corpus(root);
  const auto ev = run("evaluate --pred-dir " + q(root / "corpus" / "clean") + " --gt-dir " +
                      q(root / "corpus" / "clean") + " --binary --report " + q(root / "r.csv"));
  ASSERT_EQ(ev.code, 0) << ev.out;
  std::istringstream is(slurp(root / "r.csv"));
  std::string line, last;
  while (std::getline(is, line)) last = line;
  // mean row: psnr inf excluded -> n/a, ssim 1, F 100, F_ps 100, DRD 0
  EXPECT_EQ(last, "mean,n/a,1.000000,100.000000,100.000000,0.000000");
  fs::create_directories(root / "empty");
  EXPECT_EQ(run("evaluate --pred-dir " + q(root / "empty") + " --gt-dir " + q(root / "corpus" / "clean")).code, 3);
}

TEST(Cli, ResumeEqualsUninterruptedRun) {
  const auto root = testutil::fresh_dir("cli");
  make_corpus(root);
  const std::string data = "--degraded-dir " + q(root / "corpus" / "degraded") + " --clean-dir " +
                           q(root / "corpus" / "clean") + " --task watermark --seed 4 " + kSmallNet;
  ASSERT_EQ(run("train " + data + " --max-steps 4 --out-checkpoint " + q(root / "full.ckpt")).code, 0);
  ASSERT_EQ(run("train " + data + " --max-steps 2 --out-checkpoint " + q(root / "half.ckpt")).code, 0);
  const auto r = run("train --degraded-dir " + q(root / "corpus" / "degraded") + " --clean-dir " +
                     q(root / "corpus" / "clean") + " --resume " + q(root / "half.ckpt") +
                     " --max-steps 4 --log-every 0 --out-checkpoint " + q(root / "resumed.ckpt"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(loss_log_path(root / "resumed.ckpt")), slurp(loss_log_path(root / "full.ckpt")));
  EXPECT_EQ(slurp(root / "resumed.ckpt"), slurp(root / "full.ckpt"));
}

TEST(Cli, ConfigFileAndEnvironmentPrecedence) {
  const auto root = testutil::fresh_dir("cli");
  make_corpus(root);
  std::ofstream(root / "env.cfg") << "task = cleanup\nlambda = 7\n";
  std::ofstream(root / "flag.cfg") << "task = cleanup\nlambda = 9\n";
  const std::string data = "--degraded-dir " + q(root / "corpus" / "degraded") + " --clean-dir " +
                           q(root / "corpus" / "clean") + " --max-steps 1 " + kSmallNet;
  const std::string env = "DEGAN_CONFIG=" + q(root / "env.cfg");
  ASSERT_EQ(run("train " + data + " --out-checkpoint " + q(root / "e.ckpt"), env).code, 0);
  EXPECT_NE(slurp(loss_log_path(root / "e.ckpt")).find("# lambda = 7\n"), std::string::npos);
  ASSERT_EQ(run("train " + data + " --config " + q(root / "flag.cfg") + " --out-checkpoint " + q(root / "f.ckpt"), env).code, 0);
  EXPECT_NE(slurp(loss_log_path(root / "f.ckpt")).find("# lambda = 9\n"), std::string::npos);
  ASSERT_EQ(run("train " + data + " --config " + q(root / "flag.cfg") + " --lambda 11 --out-checkpoint " + q(root / "g.ckpt")).code, 0);
  EXPECT_NE(slurp(loss_log_path(root / "g.ckpt")).find("# lambda = 11\n"), std::string::npos);
  std::ofstream(root / "bad.cfg") << "lamda = 3\n";
  EXPECT_EQ(run("train " + data + " --config " + q(root / "bad.cfg") + " --out-checkpoint " + q(root / "h.ckpt")).code, 2);
}

TEST(Cli, TrainDataAndDivergenceErrors) {
  const auto root = testutil::fresh_dir("cli");
  make_corpus(root);
  fs::create_directories(root / "none");
  EXPECT_EQ(run("train --degraded-dir " + q(root / "none") + " --clean-dir " + q(root / "corpus" / "clean") +
                " --out-checkpoint " + q(root / "x.ckpt") + " " + kSmallNet).code, 3);
  const auto r = run("train --degraded-dir " + q(root / "corpus" / "degraded") + " --clean-dir " +
                     q(root / "corpus" / "clean") + " --out-checkpoint " + q(root / "d.ckpt") +
                     " --max-steps 20 --lr 1e30 " + kSmallNet);
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("d.ckpt.diverged.txt"), std::string::npos);
  EXPECT_NE(slurp(root / "d.ckpt.diverged.txt").find("page_0000"), std::string::npos);
}

TEST(Cli, EnhanceArchitectureMismatchExitsThree) {
  const auto root = testutil::fresh_dir("cli");
  save_png(root / "in.png", ImagePlane(256, 256, 0.5f));
  std::ofstream(root / "junk.ckpt") << "DEGANCKP garbage";
  EXPECT_EQ(run("enhance --checkpoint " + q(root / "junk.ckpt") + " --input " + q(root / "in.png") +
                " --output " + q(root / "o.png")).code, 3);
}

TEST(Cli, BinarizeBaseline) {
  const auto root = testutil::fresh_dir("cli");
  save_png(root / "flat.png", ImagePlane(40, 40, 0.7f));
  ASSERT_EQ(run("binarize-baseline --method otsu --input " + q(root / "flat.png") + " --output " + q(root / "o.png")).code, 0);
  for (float v : load_image(root / "o.png").values()) ASSERT_EQ(v, 1.0f);

  const auto page = degrade::synthesize_clean_page(128, 128, 2);
  const auto noisy = degrade::apply(page, [] {
    degrade::DegradationSpec s;
    s.seed = 3;
    s.kinds = {degrade::Kind::gaussian_noise};
    return s;
  }());
  save_png(root / "page.png", noisy);
  ASSERT_EQ(run("binarize-baseline --method sauvola --k 0.5 --input " + q(root / "page.png") + " --output " + q(root / "s.png")).code, 0);
  const auto lib = baselines::sauvola(load_image(root / "page.png"), 25, 0.5, 0.5);
  EXPECT_EQ(to_binary(load_image(root / "s.png")), lib);

  EXPECT_EQ(run("binarize-baseline --method niblack --window 14 --input " + q(root / "page.png") + " --output " + q(root / "n.png")).code, 2);
  EXPECT_EQ(run("binarize-baseline --method magic --input " + q(root / "page.png") + " --output " + q(root / "n.png")).code, 2);
}
