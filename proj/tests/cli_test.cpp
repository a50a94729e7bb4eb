#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cyst/cli.hpp"

using namespace cyst;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string sub(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) {
    if (c == '\n') ++n;
  }
  return n;
}

std::vector<std::string> tiny_gen_args(const std::string& dir, const std::string& seed = "7") {
  return {"gen-synth", "--vocab", "20",    "--marked", "3",   "--per-style",
          "40",        "--seed",  seed,    "--out",    dir};
}

std::vector<std::string> tiny_train_args(const std::string& data, const std::string& ckpt) {
  return {"train",          "--data",      data, "--out",        ckpt,
          "--hidden",       "10",          "--emb-dim",          "6",
          "--n-maps",       "4",           "--filter-widths",    "1,2",
          "--max-gen-len",  "8",           "--batch-size",       "16",
          "--max-epochs",   "2",           "--lr",               "0.003",
          "--seed",         "5"};
}

}  // namespace

TEST(Config, EmptyFileKeepsReferenceDefaults) {
  TempDir dir("cyst_cli_cfg_empty");
  std::ofstream(dir.sub("run.conf")) << "";
  RunConfig cfg;
  load_config_file(cfg, dir.sub("run.conf"));
  EXPECT_EQ(cfg.train.hidden, 200u);
  EXPECT_EQ(cfg.train.emb_dim, 100u);
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.0005);
  EXPECT_EQ(cfg.train.batch_size, 64u);
  EXPECT_EQ(cfg.train.max_epochs, 30u);
  EXPECT_FALSE(cfg.train.no_attention);
}

TEST(Config, FileValuesCommentsAndErrors) {
  TempDir dir("cyst_cli_cfg_file");
  std::ofstream(dir.sub("run.conf")) << "# experiment settings\n"
                                        "lr = 0.001   # overrides default\n"
                                        "hidden=32\n"
                                        "filter_widths = 1, 2, 3\n"
                                        "no_attention = true\n"
                                        "data = corpus/\n"
                                        "\n";
  RunConfig cfg;
  load_config_file(cfg, dir.sub("run.conf"));
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.001);
  EXPECT_EQ(cfg.train.hidden, 32u);
  EXPECT_EQ(cfg.train.filter_widths, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(cfg.train.no_attention);
  EXPECT_EQ(cfg.data, "corpus/");

  std::ofstream(dir.sub("unknown.conf")) << "hidden = 16\nwat = 3\n";
  try {
    load_config_file(cfg, dir.sub("unknown.conf"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("wat"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }

  std::ofstream(dir.sub("badval.conf")) << "lr = fast\n";
  try {
    load_config_file(cfg, dir.sub("badval.conf"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":1"), std::string::npos);
  }

  std::ofstream(dir.sub("noeq.conf")) << "hidden 16\n";
  EXPECT_THROW(load_config_file(cfg, dir.sub("noeq.conf")), ConfigError);
  EXPECT_THROW(load_config_file(cfg, dir.sub("missing.conf")), IoError);
}

TEST(Config, FlagsOverrideConfigFile) {
  TempDir dir("cyst_cli_cfg_override");
  std::ofstream(dir.sub("run.conf")) << "lr = 0.01\nhidden = 64\n";
  RunConfig cfg = parse_cli_config(
      {"--lr", "0.002", "--config", dir.sub("run.conf"), "--no-back-transfer"});
  // The file is applied first even though --config appears after --lr.
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.002);
  EXPECT_EQ(cfg.train.hidden, 64u);
  EXPECT_TRUE(cfg.train.no_back_transfer);

  EXPECT_THROW(parse_cli_config({"--lr"}), ConfigError);
  EXPECT_THROW(parse_cli_config({"--config"}), ConfigError);
  EXPECT_THROW(parse_cli_config({"stray"}), ConfigError);
  EXPECT_THROW(parse_cli_config({"--not-a-key", "3"}), ConfigError);
}

TEST(Cli, HelpAndUnknownCommand) {
  CliResult help = run({"help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("gen-synth"), std::string::npos);

  EXPECT_EQ(run({}).code, 2);
  CliResult unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("frobnicate"), std::string::npos);

  CliResult badflag = run({"train", "--wat", "3"});
  EXPECT_EQ(badflag.code, 2);
  EXPECT_NE(badflag.err.find("wat"), std::string::npos);
}

TEST(Cli, GenSynthWritesDeterministicFiles) {
  TempDir dir("cyst_cli_gensynth");
  const std::string data = dir.sub("data");
  CliResult first = run(tiny_gen_args(data));
  EXPECT_EQ(first.code, 0) << first.err;
  for (const char* name : {"style0.txt", "style1.txt", "oracle.tsv", "manifest.txt"}) {
    EXPECT_TRUE(fs::exists(fs::path(data) / name)) << name;
  }
  EXPECT_EQ(line_count(slurp(data + "/oracle.tsv")), 3u);
  EXPECT_EQ(line_count(slurp(data + "/style0.txt")), 40u);

  const std::string s0 = slurp(data + "/style0.txt");
  const std::string s1 = slurp(data + "/style1.txt");

  CliResult refuse = run(tiny_gen_args(data));
  EXPECT_EQ(refuse.code, 2);
  EXPECT_NE(refuse.err.find("--force"), std::string::npos);

  auto force_args = tiny_gen_args(data);
  force_args.push_back("--force");
  EXPECT_EQ(run(force_args).code, 0);
  EXPECT_EQ(slurp(data + "/style0.txt"), s0);
  EXPECT_EQ(slurp(data + "/style1.txt"), s1);

  auto other_seed = tiny_gen_args(data, "8");
  other_seed.push_back("--force");
  EXPECT_EQ(run(other_seed).code, 0);
  EXPECT_NE(slurp(data + "/style0.txt"), s0);
}

TEST(Cli, TrainIsDeterministicAndTransferEvaluateComplete) {
  TempDir dir("cyst_cli_pipeline");
  const std::string data = dir.sub("data");
  ASSERT_EQ(run(tiny_gen_args(data, "3")).code, 0);

  CliResult t1 = run(tiny_train_args(data, dir.sub("a.ckpt")));
  EXPECT_EQ(t1.code, 0) << t1.err;
  EXPECT_NE(t1.out.find("best_epoch="), std::string::npos);
  ASSERT_TRUE(fs::exists(dir.sub("a.ckpt")));
  ASSERT_TRUE(fs::exists(dir.sub("a.ckpt.log")));

  const std::string log = slurp(dir.sub("a.ckpt.log"));
  EXPECT_EQ(line_count(log), 3u);  // warm-up plus two joint epochs
  std::istringstream lines(log);
  std::string line;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 7) << line;
  }

  ASSERT_EQ(run(tiny_train_args(data, dir.sub("b.ckpt"))).code, 0);
  EXPECT_EQ(slurp(dir.sub("a.ckpt.log")), slurp(dir.sub("b.ckpt.log")));
  EXPECT_EQ(slurp(dir.sub("a.ckpt")), slurp(dir.sub("b.ckpt")));

  CliResult tr = run({"transfer", "--checkpoint", dir.sub("a.ckpt"), "--input",
                      data + "/style0.txt", "--output", dir.sub("transferred.txt"),
                      "--max-gen-len", "8"});
  EXPECT_EQ(tr.code, 0) << tr.err;
  EXPECT_EQ(line_count(slurp(dir.sub("transferred.txt"))),
            line_count(slurp(data + "/style0.txt")));

  // Unseen words map to the placeholder id instead of crashing.
  std::ofstream(dir.sub("oov.txt")) << "zzz unseen words here\n\nw1 w2 zzz\n";
  CliResult oov = run({"transfer", "--checkpoint", dir.sub("a.ckpt"), "--input",
                       dir.sub("oov.txt"), "--output", dir.sub("oov_out.txt")});
  EXPECT_EQ(oov.code, 0) << oov.err;
  EXPECT_EQ(line_count(slurp(dir.sub("oov_out.txt"))), 3u);

  std::ofstream(dir.sub("empty.txt")) << "";
  CliResult empty = run({"transfer", "--checkpoint", dir.sub("a.ckpt"), "--input",
                         dir.sub("empty.txt"), "--output", dir.sub("empty_out.txt")});
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(slurp(dir.sub("empty_out.txt")), "");

  CliResult ev = run({"evaluate", "--data", data, "--source", data + "/style0.txt",
                      "--transferred", dir.sub("transferred.txt"), "--oracle",
                      data + "/oracle.tsv", "--lm-hidden", "16", "--lm-emb-dim", "8",
                      "--lm-epochs", "2", "--seed", "5", "--report", dir.sub("report.tsv")});
  EXPECT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("acc="), std::string::npos);
  EXPECT_NE(ev.out.find("cp="), std::string::npos);
  EXPECT_NE(ev.out.find("ppl="), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.sub("report.tsv")));
  // Header, one row per style-0 line, summary footer.
  EXPECT_EQ(line_count(slurp(dir.sub("report.tsv"))),
            line_count(slurp(data + "/style0.txt")) + 2);
}

TEST(Cli, ExitCodesFollowTheContract) {
  TempDir dir("cyst_cli_codes");
  const std::string data = dir.sub("data");
  ASSERT_EQ(run(tiny_gen_args(data, "4")).code, 0);

  EXPECT_EQ(run({"transfer", "--checkpoint", dir.sub("missing.ckpt"), "--input",
                 data + "/style0.txt", "--output", dir.sub("out.txt")})
                .code,
            4);

  std::ofstream(dir.sub("garbage.ckpt"), std::ios::binary) << "not a checkpoint";
  EXPECT_EQ(run({"transfer", "--checkpoint", dir.sub("garbage.ckpt"), "--input",
                 data + "/style0.txt", "--output", dir.sub("out.txt")})
                .code,
            4);

  EXPECT_EQ(run({"train", "--data", dir.sub("nowhere")}).code, 4);
  EXPECT_EQ(run({"train", "--data", data, "--lr", "fast"}).code, 2);
  EXPECT_EQ(run({"train"}).code, 2);  // --data missing

  std::ofstream(dir.sub("short.txt")) << "w1 w2 w3\n";
  CliResult mismatch =
      run({"evaluate", "--data", data, "--source", data + "/style0.txt", "--transferred",
           dir.sub("short.txt"), "--oracle", data + "/oracle.tsv"});
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.err.find("mismatch"), std::string::npos);
}

TEST(Cli, AblateEmitsFourRows) {
  TempDir dir("cyst_cli_ablate");
  const std::string data = dir.sub("data");
  ASSERT_EQ(run(tiny_gen_args(data, "6")).code, 0);

  CliResult ab = run({"ablate",          "--data",    data,
                      "--hidden",        "8",         "--emb-dim",
                      "6",               "--n-maps",  "4",
                      "--filter-widths", "1,2",       "--max-gen-len",
                      "8",               "--batch-size", "16",
                      "--max-epochs",    "1",         "--lm-hidden",
                      "12",              "--lm-emb-dim", "8",
                      "--lm-epochs",     "2",         "--oracle",
                      data + "/oracle.tsv", "--seed", "2",
                      "--report",        dir.sub("ablation.tsv")});
  EXPECT_EQ(ab.code, 0) << ab.err;
  EXPECT_EQ(line_count(ab.out), 5u);
  EXPECT_NE(ab.out.find("variant\tacc\tcp\tppl"), std::string::npos);
  EXPECT_NE(ab.out.find("full\t"), std::string::npos);
  EXPECT_NE(ab.out.find("no_attention\t"), std::string::npos);
  EXPECT_NE(ab.out.find("no_back_transfer\t"), std::string::npos);
  EXPECT_NE(ab.out.find("no_attention_no_back_transfer\t"), std::string::npos);
  EXPECT_EQ(slurp(dir.sub("ablation.tsv")), ab.out);
}
