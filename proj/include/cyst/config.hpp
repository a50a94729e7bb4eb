#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cyst/error.hpp"
#include "cyst/trainer.hpp"

namespace cyst {

// Everything the command-line surface can set. Keys use snake_case in config
// files and --kebab-case on the command line; unknown keys are errors.
struct RunConfig {
  TrainConfig train;

  // corpus loading
  std::string data;  // directory holding style0.txt and style1.txt
  std::size_t min_freq = 1;
  std::size_t min_len = 2;
  std::size_t max_len = 15;

  // synthetic generation
  std::size_t vocab = 60;
  std::size_t marked = 8;
  std::size_t per_style = 2000;
  std::size_t len_lo = 4;
  std::size_t len_hi = 9;
  bool force = false;

  // evaluation language model
  std::size_t lm_hidden = 200;
  std::size_t lm_emb_dim = 100;
  std::size_t lm_epochs = 30;
  std::size_t lm_patience = 5;
  double lm_lr = 0.0005;

  // frozen evaluation classifier
  std::size_t fc_epochs = 20;

  // transfer-time override of the checkpoint's generation cap; 0 = keep it
  std::size_t gen_len_override = 0;

  // paths; empty means each command's documented default
  std::string out;
  std::string log;
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string source;
  std::string transferred;
  std::string embeddings;
  std::string report;
  std::string oracle;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& value,
                                   const std::string& where) {
  throw ConfigError("bad value '" + value + "' for key '" + key + "' (" + where + ")");
}

inline std::size_t parse_size(const std::string& key, const std::string& value,
                              const std::string& where) {
  std::size_t n = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
  if (ec != std::errc() || p != value.data() + value.size()) bad_value(key, value, where);
  return n;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& value,
                               const std::string& where) {
  std::uint64_t n = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
  if (ec != std::errc() || p != value.data() + value.size()) bad_value(key, value, where);
  return n;
}

inline double parse_double(const std::string& key, const std::string& value,
                           const std::string& where) {
  try {
    std::size_t used = 0;
    double x = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, where);
    return x;
  } catch (const std::exception&) {
    bad_value(key, value, where);
  }
}

inline bool parse_bool(const std::string& key, const std::string& value,
                       const std::string& where) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, where);
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value,
                                                const std::string& where) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    out.push_back(parse_size(key, trim(value.substr(start, comma - start)), where));
    start = comma + 1;
  }
  if (out.empty()) bad_value(key, value, where);
  return out;
}

}  // namespace detail

inline bool is_flag_key(const std::string& key) {
  return key == "no_attention" || key == "no_back_transfer" || key == "force";
}

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                          const std::string& where) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_size;
  using detail::parse_size_list;
  using detail::parse_u64;

  if (key == "hidden") cfg.train.hidden = parse_size(key, value, where);
  else if (key == "emb_dim") cfg.train.emb_dim = parse_size(key, value, where);
  else if (key == "filter_widths") cfg.train.filter_widths = parse_size_list(key, value, where);
  else if (key == "n_maps") cfg.train.n_maps = parse_size(key, value, where);
  else if (key == "lr") cfg.train.lr = parse_double(key, value, where);
  else if (key == "batch_size") cfg.train.batch_size = parse_size(key, value, where);
  else if (key == "max_epochs") cfg.train.max_epochs = parse_size(key, value, where);
  else if (key == "patience") cfg.train.patience = parse_size(key, value, where);
  else if (key == "warmup_epochs") cfg.train.warmup_epochs = parse_size(key, value, where);
  else if (key == "tau_start") cfg.train.tau_start = parse_double(key, value, where);
  else if (key == "tau_anneal") cfg.train.tau_anneal = parse_double(key, value, where);
  else if (key == "tau_floor") cfg.train.tau_floor = parse_double(key, value, where);
  else if (key == "max_gen_len") {
    cfg.train.max_gen_len = parse_size(key, value, where);
    cfg.gen_len_override = cfg.train.max_gen_len;
  }
  else if (key == "seed") cfg.train.seed = parse_u64(key, value, where);
  else if (key == "no_attention") cfg.train.no_attention = parse_bool(key, value, where);
  else if (key == "no_back_transfer") cfg.train.no_back_transfer = parse_bool(key, value, where);
  else if (key == "data") cfg.data = value;
  else if (key == "min_freq") cfg.min_freq = parse_size(key, value, where);
  else if (key == "min_len") cfg.min_len = parse_size(key, value, where);
  else if (key == "max_len") cfg.max_len = parse_size(key, value, where);
  else if (key == "vocab") cfg.vocab = parse_size(key, value, where);
  else if (key == "marked") cfg.marked = parse_size(key, value, where);
  else if (key == "per_style") cfg.per_style = parse_size(key, value, where);
  else if (key == "len_lo") cfg.len_lo = parse_size(key, value, where);
  else if (key == "len_hi") cfg.len_hi = parse_size(key, value, where);
  else if (key == "force") cfg.force = parse_bool(key, value, where);
  else if (key == "lm_hidden") cfg.lm_hidden = parse_size(key, value, where);
  else if (key == "lm_emb_dim") cfg.lm_emb_dim = parse_size(key, value, where);
  else if (key == "lm_epochs") cfg.lm_epochs = parse_size(key, value, where);
  else if (key == "lm_patience") cfg.lm_patience = parse_size(key, value, where);
  else if (key == "lm_lr") cfg.lm_lr = parse_double(key, value, where);
  else if (key == "fc_epochs") cfg.fc_epochs = parse_size(key, value, where);
  else if (key == "out") cfg.out = value;
  else if (key == "log") cfg.log = value;
  else if (key == "checkpoint") cfg.checkpoint = value;
  else if (key == "input") cfg.input = value;
  else if (key == "output") cfg.output = value;
  else if (key == "source") cfg.source = value;
  else if (key == "transferred") cfg.transferred = value;
  else if (key == "embeddings") cfg.embeddings = value;
  else if (key == "report") cfg.report = value;
  else if (key == "oracle") cfg.oracle = value;
  else throw ConfigError("unknown config key '" + key + "' (" + where + ")");
}

// Flat `key = value` file; '#' starts a comment, blank lines are skipped.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("missing '=' (" + where + ")");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key (" + where + ")");
    apply_setting(cfg, key, value, where);
  }
}

// Command-line flags mirror config keys as --kebab-case. A --config file is
// applied first so explicit flags always win. Boolean keys are bare flags.
inline RunConfig parse_cli_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file path");
      load_config_file(cfg, args[i + 1]);
      ++i;
    }
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg == "--config") {
      ++i;
      continue;
    }
    if (arg.size() < 3 || arg.substr(0, 2) != "--") {
      throw ConfigError("unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    for (char& c : key) {
      if (c == '-') c = '_';
    }
    if (is_flag_key(key)) {
      apply_setting(cfg, key, "true", arg);
    } else {
      if (i + 1 >= args.size()) throw ConfigError("flag " + arg + " needs a value");
      apply_setting(cfg, key, args[++i], arg);
    }
  }
  return cfg;
}

}  // namespace cyst
