// Copyright 2026 The NRM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <gtest/gtest.h>

#include <sstream>

#include "nrm/checkpoint.h"
#include "test_util.h"

namespace nrm::cli {
namespace {

using nrm::testing::read_text;
using nrm::testing::TempDir;
using nrm::testing::write_text;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    auto pairs = nrm::testing::toy_pairs(16, 8);
    pairs.push_back({{"p1", "p2"}, {"wow"}});
    write_pairs(dir.file("raw.tsv"), pairs);
    write_text(dir.file("posts.txt"), "p1 p2 p3\np4 p5\tignored gold\n\np7\n");
  }

  // clean, both vocabularies and a short loc training run.
  void prepare(const std::string& scheme = "loc", const std::string& out = "model.nrm") {
    ASSERT_EQ(run({"clean", "--pairs", dir.file("raw.tsv"), "--out", dir.file("clean.tsv")}).code, 0);
    ASSERT_EQ(run({"build-vocab", "--pairs", dir.file("clean.tsv"), "--side", "post", "--out",
                   dir.file("post.vocab")})
                  .code,
              0);
    ASSERT_EQ(run({"build-vocab", "--pairs", dir.file("clean.tsv"), "--side", "response", "--out",
                   dir.file("resp.vocab")})
                  .code,
              0);
    const Outcome r = run({"train", "--pairs", dir.file("clean.tsv"), "--post-vocab",
                       dir.file("post.vocab"), "--response-vocab", dir.file("resp.vocab"),
                       "--scheme", scheme, "--out", dir.file(out), "--epochs", "2", "--hidden",
                       "8", "--embed", "6", "--attention-dim", "8", "--stimulus-dim", "6",
                       "--quiet"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::vector<std::string> model_args(const std::string& model = "model.nrm") {
    return {"--checkpoint", dir.file(model), "--post-vocab", dir.file("post.vocab"),
            "--response-vocab", dir.file("resp.vocab")};
  }

  TempDir dir{"cli"};
};

TEST_F(Cli, CleanReportsCounts) {
  const Outcome r = run({"clean", "--pairs", dir.file("raw.tsv"), "--out", dir.file("clean.tsv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("kept\t16\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("removed_trivial\t1\n"), std::string::npos);
  EXPECT_EQ(load_pairs(dir.file("clean.tsv")).pairs.size(), 16u);
}

TEST_F(Cli, TrainLogsEpochsAndWritesCheckpoint) {
  prepare();
  const Outcome r = run({"train", "--pairs", dir.file("clean.tsv"), "--post-vocab",
                     dir.file("post.vocab"), "--response-vocab", dir.file("resp.vocab"),
                     "--out", dir.file("m2.nrm"), "--epochs", "3", "--hidden", "8", "--log",
                     dir.file("train.log")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string log = read_text(dir.file("train.log"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
  EXPECT_TRUE(log.starts_with("1\t"));
  EXPECT_EQ(load_checkpoint(dir.file("m2.nrm")).dims.hidden, 8u);
  EXPECT_NE(r.err.find("saved"), std::string::npos);
}

TEST_F(Cli, GenerateTextAndJsonl) {
  prepare();
  auto args = model_args();
  args.insert(args.begin(), "generate");
  for (const char* extra : {"--posts", "--beam", "--nbest"}) args.push_back(extra), args.push_back("");
  args[args.size() - 5] = dir.file("posts.txt");
  args[args.size() - 3] = "3";
  args[args.size() - 1] = "2";
  const Outcome text = run(args);
  ASSERT_EQ(text.code, 0) << text.err;
  std::istringstream lines(text.out);
  std::string line;
  int ranked = 0, blank = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) {
      ++blank;
      continue;
    }
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 2) << line;
    EXPECT_EQ(line.find("</s>"), std::string::npos);
    ++ranked;
  }
  EXPECT_EQ(ranked, 6);
  EXPECT_EQ(blank, 2);

  args.push_back("--format");
  args.push_back("jsonl");
  const Outcome json = run(args);
  ASSERT_EQ(json.code, 0);
  EXPECT_EQ(std::count(json.out.begin(), json.out.end(), '\n'), 6);
  EXPECT_NE(json.out.find("\"log_prob\""), std::string::npos);
}

TEST_F(Cli, MultiGenerateDistinctFirstWords) {
  prepare();
  auto args = model_args();
  args.insert(args.begin(), "multi-generate");
  args.insert(args.end(), {"--posts", dir.file("posts.txt"), "--beam", "40", "--max-len", "4",
                           "--format", "jsonl"});
  const Outcome r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(r.out.empty());
}

TEST_F(Cli, PerplexityAndInspect) {
  prepare("hyb");
  auto args = model_args();
  args.insert(args.begin(), "perplexity");
  args.insert(args.end(), {"--pairs", dir.file("clean.tsv")});
  const Outcome r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("perplexity\t"), std::string::npos);
  const Outcome ins = run({"inspect-checkpoint", "--checkpoint", dir.file("model.nrm")});
  ASSERT_EQ(ins.code, 0) << ins.err;
  EXPECT_NE(ins.out.find("scheme\thyb"), std::string::npos);
  EXPECT_NE(ins.out.find("enc_global.w_z\t8x6\t"), std::string::npos) << ins.out;
  EXPECT_NE(ins.out.find("out.b_o\t"), std::string::npos);
}

TEST_F(Cli, HybridFromPretrained) {
  prepare("loc", "loc.nrm");
  prepare("glo", "glo.nrm");
  const std::vector<std::string> base = {
      "train", "--pairs", dir.file("clean.tsv"), "--post-vocab", dir.file("post.vocab"),
      "--response-vocab", dir.file("resp.vocab"), "--out", dir.file("hyb.nrm"), "--epochs", "1",
      "--hidden", "8", "--embed", "6", "--attention-dim", "8", "--stimulus-dim", "6"};
  auto args = base;
  args.insert(args.end(), {"--scheme", "hyb", "--init-from-loc", dir.file("loc.nrm"),
                           "--init-from-glo", dir.file("glo.nrm")});
  const Outcome r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("init enc_global.w_z: from-glo"), std::string::npos) << r.err;
  EXPECT_EQ(load_checkpoint(dir.file("hyb.nrm")).scheme, Scheme::kHybrid);

  auto wrong = base;
  wrong.insert(wrong.end(), {"--scheme", "loc", "--init-from-loc", dir.file("loc.nrm"),
                             "--init-from-glo", dir.file("glo.nrm"), "--out",
                             dir.file("never.nrm")});
  wrong.erase(wrong.begin() + 7, wrong.begin() + 9);  // drop the first --out
  const Outcome bad = run(wrong);
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(std::filesystem::exists(dir.file("never.nrm")));
}

TEST_F(Cli, GradCheckExitStatus) {
  const Outcome ok = run({"grad-check", "--scheme", "loc", "--seed", "2"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("result\tpass"), std::string::npos);
  const Outcome fail = run({"grad-check", "--scheme", "glo", "--tolerance", "1e-30"});
  EXPECT_EQ(fail.code, 1);
  EXPECT_NE(fail.out.find("result\tfail"), std::string::npos);
}

TEST_F(Cli, KappaAndFriedman) {
  write_text(dir.file("ann.csv"),
             "item,rater,label\n1,a,Suitable\n1,b,Suitable\n2,a,0\n2,b,Unsuitable\n");
  const Outcome k = run({"kappa", "--annotations", dir.file("ann.csv")});
  ASSERT_EQ(k.code, 0) << k.err;
  EXPECT_NE(k.out.find("kappa\t1.000000"), std::string::npos) << k.out;
  EXPECT_NE(k.out.find("mean_score\t1.000000"), std::string::npos);

  write_text(dir.file("scores.csv"), "A,B\n2,1\n1,0\n2,0\n");
  const Outcome f = run({"friedman", "--scores", dir.file("scores.csv")});
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_NE(f.out.find("statistic\t3\n"), std::string::npos) << f.out;
  EXPECT_NE(f.out.find("average_rank\tA\t1.0000"), std::string::npos);

  write_text(dir.file("flat.csv"), "item,rater,label\n1,a,1\n1,b,1\n");
  const Outcome degenerate = run({"kappa", "--annotations", dir.file("flat.csv")});
  EXPECT_EQ(degenerate.code, 1);
  EXPECT_TRUE(degenerate.err.starts_with("nrm: error: "));
  EXPECT_EQ(std::count(degenerate.err.begin(), degenerate.err.end(), '\n'), 1);
}

TEST_F(Cli, ConfigFileWithCommandLineOverride) {
  prepare();
  write_text(dir.file("run.cfg"),
             "# training run\n"
             "pairs = " + dir.file("clean.tsv") + "\n"
             "post-vocab = " + dir.file("post.vocab") + "\n"
             "response-vocab = " + dir.file("resp.vocab") + "\n"
             "out = " + dir.file("cfg.nrm") + "\n"
             "epochs = 5\n"
             "hidden = 8\n");
  const Outcome r = run({"train", "--config", dir.file("run.cfg"), "--epochs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
  EXPECT_EQ(read_config(dir.file("run.cfg")).at("epochs"), "5");
  write_text(dir.file("bad.cfg"), "epochs 5\n");
  EXPECT_EQ(run({"train", "--config", dir.file("bad.cfg")}).code, 2);
}

TEST_F(Cli, UsageErrors) {
  const Outcome unknown = run({"frobnicate"});
  EXPECT_NE(unknown.code, 0);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos) << unknown.err;
  const Outcome flag = run({"friedman", "--scores", dir.file("raw.tsv"), "--bogus"});
  EXPECT_EQ(flag.code, 2);
  EXPECT_NE(flag.err.find("Usage"), std::string::npos);
  const Outcome missing = run({"clean", "--pairs", dir.file("nope.tsv"), "--out", dir.file("x")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir.file("x")));
  EXPECT_NE(run({}).code, 0);
  const Outcome help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("multi-generate"), std::string::npos);
}

}  // namespace
}  // namespace nrm::cli
