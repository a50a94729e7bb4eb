#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cyst/checkpoint.hpp"
#include "cyst/config.hpp"
#include "cyst/eval.hpp"
#include "cyst/synthetic.hpp"

namespace cyst {

namespace detail {

inline std::string require_path(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError("missing required flag " + flag);
  return value;
}

inline std::pair<Vocabulary, StyledCorpus> load_corpus(const RunConfig& cfg) {
  const std::string dir = require_path(cfg.data, "--data");
  const std::string p0 = (std::filesystem::path(dir) / "style0.txt").string();
  const std::string p1 = (std::filesystem::path(dir) / "style1.txt").string();
  std::vector<std::vector<std::string>> sents = read_style_tokens(p0, cfg.min_len, cfg.max_len);
  std::vector<std::vector<std::string>> s1 = read_style_tokens(p1, cfg.min_len, cfg.max_len);
  sents.insert(sents.end(), s1.begin(), s1.end());
  Vocabulary vocab = Vocabulary::build(sents, cfg.min_freq);
  StyledCorpus corpus =
      load_styled_corpus(p0, p1, vocab, cfg.min_len, cfg.max_len, {}, cfg.train.seed);
  return {std::move(vocab), std::move(corpus)};
}

inline LmConfig lm_config(const RunConfig& cfg) {
  LmConfig lm;
  lm.emb_dim = cfg.lm_emb_dim;
  lm.hidden = cfg.lm_hidden;
  lm.lr = cfg.lm_lr;
  lm.batch_size = cfg.train.batch_size;
  lm.max_epochs = cfg.lm_epochs;
  lm.patience = cfg.lm_patience;
  lm.seed = cfg.train.seed;
  return lm;
}

inline StyleJudge make_judge(const RunConfig& cfg, const Vocabulary& vocab,
                             const StyledCorpus& corpus) {
  if (!cfg.oracle.empty()) {
    SubstitutionOracle oracle = SubstitutionOracle::load(cfg.oracle, vocab);
    return [oracle](const IdSeq& ids) { return oracle.classify(ids); };
  }
  FrozenClassifierConfig fc;
  fc.epochs = cfg.fc_epochs;
  fc.seed = cfg.train.seed;
  // Held-out side: the transfer model trains on the train split only.
  return FrozenClassifier(corpus.test, vocab.size(), fc).judge();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline std::vector<IdSeq> encode_lines(const std::vector<std::string>& lines,
                                       const Vocabulary& vocab) {
  std::vector<IdSeq> out;
  out.reserve(lines.size());
  for (const std::string& line : lines) out.push_back(vocab.encode(tokenize(line)));
  return out;
}

}  // namespace detail

inline int cmd_gen_synth(const RunConfig& cfg, std::ostream& out) {
  SynthConfig sc;
  sc.vocab_size = cfg.vocab;
  sc.n_marked = cfg.marked;
  sc.n_per_style = cfg.per_style;
  sc.len_lo = cfg.len_lo;
  sc.len_hi = cfg.len_hi;
  sc.seed = cfg.train.seed;

  const std::filesystem::path dir = cfg.out.empty() ? "data" : cfg.out;
  const std::vector<std::filesystem::path> files = {dir / "style0.txt", dir / "style1.txt",
                                                    dir / "oracle.tsv", dir / "manifest.txt"};
  if (!cfg.force) {
    for (const auto& f : files) {
      if (std::filesystem::exists(f)) {
        throw ConfigError(f.string() + " exists; pass --force to overwrite");
      }
    }
  }
  std::filesystem::create_directories(dir);

  SynthResult synth = synth_generate(sc);
  for (int style = 0; style < 2; ++style) {
    std::ofstream file(files[static_cast<std::size_t>(style)]);
    if (!file) throw IoError("cannot write " + files[static_cast<std::size_t>(style)].string());
    for (const Split* split : {&synth.corpus.train, &synth.corpus.dev, &synth.corpus.test}) {
      for (const StyledSentence& s : *split) {
        if (s.style == style) file << detokenize(synth.vocab.decode(s.ids)) << '\n';
      }
    }
  }
  synth.oracle.save(files[2].string(), synth.vocab);

  std::ofstream manifest(files[3]);
  if (!manifest) throw IoError("cannot write " + files[3].string());
  manifest << "vocab = " << sc.vocab_size << "\nmarked = " << sc.n_marked
           << "\nper_style = " << sc.n_per_style << "\nlen_lo = " << sc.len_lo
           << "\nlen_hi = " << sc.len_hi << "\nseed = " << sc.seed << '\n';

  out << "wrote " << sc.n_per_style << " sentences per style under " << dir.string() << '\n';
  return 0;
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  auto [vocab, corpus] = detail::load_corpus(cfg);
  const std::string ckpt_path = cfg.out.empty() ? "model.ckpt" : cfg.out;
  const std::string log_path = cfg.log.empty() ? ckpt_path + ".log" : cfg.log;

  std::ofstream log(log_path);
  if (!log) throw IoError("cannot write log file: " + log_path);
  TrainResult result = train(corpus, vocab.size(), cfg.train, &log);
  log.close();

  save_checkpoint(ckpt_path, result.model, vocab);
  if (result.aborted) {
    out << "training aborted on numerical failure; best snapshot saved to " << ckpt_path << '\n';
    return 3;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "best_epoch=%zu best_dev=%.6f", result.best_epoch,
                result.best_dev);
  out << buf << " checkpoint=" << ckpt_path << " log=" << log_path << '\n';
  return 0;
}

inline int cmd_transfer(const RunConfig& cfg, std::ostream& out) {
  const std::string ckpt_path = cfg.checkpoint.empty() ? "model.ckpt" : cfg.checkpoint;
  LoadedModel loaded = load_checkpoint(ckpt_path);
  if (cfg.gen_len_override > 0) loaded.model.set_max_gen_len(cfg.gen_len_override);

  const std::vector<std::string> lines =
      detail::read_lines(detail::require_path(cfg.input, "--input"));
  std::ofstream output(detail::require_path(cfg.output, "--output"));
  if (!output) throw IoError("cannot write " + cfg.output);

  for (const std::string& line : lines) {
    const std::vector<std::string> toks = tokenize(line);
    if (toks.empty()) {
      output << '\n';
      continue;
    }
    const IdSeq ids = loaded.vocab.encode(toks);
    const IdSeq transferred = loaded.model.decode_greedy(loaded.model.encode(ids, 0), 1);
    output << detokenize(loaded.vocab.decode(transferred)) << '\n';
  }
  if (!output) throw IoError("failed writing " + cfg.output);
  out << "transferred " << lines.size() << " lines\n";
  return 0;
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  auto [vocab, corpus] = detail::load_corpus(cfg);
  const std::vector<std::string> source_lines =
      detail::read_lines(detail::require_path(cfg.source, "--source"));
  const std::vector<std::string> transferred_lines =
      detail::read_lines(detail::require_path(cfg.transferred, "--transferred"));
  if (source_lines.size() != transferred_lines.size()) {
    throw ConfigError("line count mismatch: " + cfg.source + " has " +
                      std::to_string(source_lines.size()) + ", " + cfg.transferred + " has " +
                      std::to_string(transferred_lines.size()));
  }

  std::vector<IdSeq> lm_train, lm_dev;
  for (const StyledSentence& s : corpus.train) {
    if (s.style == 1) lm_train.push_back(s.ids);
  }
  for (const StyledSentence& s : corpus.dev) {
    if (s.style == 1) lm_dev.push_back(s.ids);
  }
  LmTrainResult lm = train_lm(lm_train, lm_dev, vocab.size(), detail::lm_config(cfg));

  EmbeddingTable emb = cfg.embeddings.empty()
                           ? EmbeddingTable::from_matrix(vocab, lm.model.word_embeddings())
                           : EmbeddingTable::load(cfg.embeddings);
  StyleJudge judge = detail::make_judge(cfg, vocab, corpus);

  EvalReport report =
      evaluate_transfer(detail::encode_lines(source_lines, vocab),
                        detail::encode_lines(transferred_lines, vocab), 1, judge, emb,
                        lm.model, vocab);
  const std::string report_path = cfg.report.empty() ? "report.tsv" : cfg.report;
  write_report(report, report_path);
  out << summary_line(report) << '\n';
  return 0;
}

inline int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
  auto [vocab, corpus] = detail::load_corpus(cfg);
  StyleJudge judge = detail::make_judge(cfg, vocab, corpus);
  std::vector<AblationRow> rows =
      run_ablations(corpus, vocab, cfg.train, detail::lm_config(cfg), judge);

  std::ostringstream table;
  table << "variant\tacc\tcp\tppl\n";
  char buf[64];
  for (const AblationRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "\t%.4f\t%.4f\t%.4f\n", row.acc, row.cp, row.ppl);
    table << row.variant << buf;
  }
  out << table.str();
  if (!cfg.report.empty()) {
    std::ofstream file(cfg.report);
    if (!file) throw IoError("cannot write " + cfg.report);
    file << table.str();
  }
  return 0;
}

inline const char* cli_usage() {
  return
      "usage: cyst <command> [--key value ...] [--config file]\n"
      "\n"
      "commands:\n"
      "  gen-synth   write a synthetic style corpus (style0.txt, style1.txt,\n"
      "              oracle.tsv, manifest.txt) under --out (default data/)\n"
      "  train       train a transfer model on --data, save --out checkpoint\n"
      "  transfer    rewrite --input style-0 sentences using --checkpoint\n"
      "  evaluate    score --source/--transferred pairs: accuracy, content\n"
      "              preservation, perplexity\n"
      "  ablate      train and score the four model variants\n"
      "\n"
      "keys mirror config-file entries (snake_case in files, --kebab-case as\n"
      "flags); boolean flags: --no-attention --no-back-transfer --force\n";
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.empty()) {
      err << cli_usage();
      return 2;
    }
    const std::string cmd = args[0];
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
      out << cli_usage();
      return 0;
    }
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    const RunConfig cfg = parse_cli_config(rest);
    if (cmd == "gen-synth") return cmd_gen_synth(cfg, out);
    if (cmd == "train") return cmd_train(cfg, out);
    if (cmd == "transfer") return cmd_transfer(cfg, out);
    if (cmd == "evaluate") return cmd_evaluate(cfg, out);
    if (cmd == "ablate") return cmd_ablate(cfg, out);
    err << "unknown command '" << cmd << "'\n" << cli_usage();
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return 4;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cyst
