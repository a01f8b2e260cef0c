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

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "nrm/checkpoint.h"
#include "nrm/corpus.h"
#include "nrm/decoding.h"
#include "nrm/error.h"
#include "nrm/evalstats.h"
#include "nrm/training.h"

namespace nrm::cli {
namespace {

namespace fs = std::filesystem;

std::string format_real(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string format_general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_output(const std::string& path) {
  const fs::path p(path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw Error("output directory does not exist: " + dir.string());
}

class Log {
 public:
  Log(std::ostream& err, const bool& quiet) : err_(err), quiet_(quiet) {}
  template <typename... Args>
  void operator()(const Args&... args) const {
    if (quiet_) return;
    err_ << "nrm: ";
    (err_ << ... << args);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  const bool& quiet_;
};

struct Common {
  bool quiet = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct CleanArgs {
  std::string pairs, out;
  CleanConfig config;
  std::string stoplist;
};

struct VocabArgs {
  std::string pairs, out, side = "post";
  std::size_t cap = 40000;
};

struct TrainArgs {
  std::string pairs, post_vocab, response_vocab, out, log, scheme = "loc";
  std::string init_from_loc, init_from_glo;
  bool freeze_copied_encoder = false;
  TrainConfig config;
};

struct GenerateArgs {
  std::string checkpoint, post_vocab, response_vocab, posts, format = "text";
  DecodeOptions options;
  std::size_t nbest = 0;
};

struct PerplexityArgs {
  std::string checkpoint, post_vocab, response_vocab, pairs;
  std::size_t max_response_tokens = 0;
};

struct GradCheckArgs {
  std::string scheme = "loc";
  double tolerance = 1e-4;
  double epsilon = 1e-5;
};

struct KappaArgs {
  std::string annotations, categories;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Category> parse_categories(const std::string& text) {
  if (text.empty()) return default_categories();
  std::vector<Category> cats;
  for (const auto& item : split_list(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("categories: expected name=score, got '" + item + "'");
    Category c;
    c.name = trim(item.substr(0, eq));
    try {
      std::size_t used = 0;
      c.score = std::stod(item.substr(eq + 1), &used);
    } catch (const std::exception&) {
      throw Error("categories: bad score in '" + item + "'");
    }
    cats.push_back(c);
  }
  return cats;
}

std::vector<IdSeq> read_posts(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("posts: cannot open " + path);
  std::vector<IdSeq> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!is_valid_utf8(line)) throw Error("posts: invalid UTF-8 on line " + std::to_string(line_no));
    const auto tab = line.find('\t');
    if (tab != std::string::npos) line.resize(tab);
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    posts.push_back(encode(tokens, vocab, false));
  }
  if (posts.empty()) throw Error("posts: no posts in " + path);
  return posts;
}

struct LoadedModel {
  ModelParams params;
  Vocabulary post_vocab;
  Vocabulary response_vocab;
};

LoadedModel load_model(const std::string& checkpoint, const std::string& post_vocab,
                       const std::string& response_vocab) {
  LoadedModel m{load_checkpoint(checkpoint), load_vocab(post_vocab, Side::kPost),
                load_vocab(response_vocab, Side::kResponse)};
  if (m.params.dims.post_vocab != m.post_vocab.size() ||
      m.params.dims.response_vocab != m.response_vocab.size()) {
    throw Error("checkpoint vocabulary sizes (" + std::to_string(m.params.dims.post_vocab) + ", " +
                std::to_string(m.params.dims.response_vocab) + ") do not match vocab files (" +
                std::to_string(m.post_vocab.size()) + ", " +
                std::to_string(m.response_vocab.size()) + ")");
  }
  return m;
}

int run_clean(const CleanArgs& a, std::ostream& out, const Log& log) {
  CleanConfig cfg = a.config;
  if (!a.stoplist.empty()) cfg.trivial_stoplist = split_list(a.stoplist);
  check_output(a.out);
  const auto loaded = load_pairs(a.pairs);
  log("loaded ", loaded.pairs.size(), " pairs (", loaded.blank_lines, " blank lines skipped)");
  const auto report = clean_corpus(loaded.pairs, cfg);
  write_pairs(a.out, report.pairs);
  out << "input\t" << loaded.pairs.size() << '\n'
      << "kept\t" << report.pairs.size() << '\n'
      << "removed_empty\t" << report.removed_empty << '\n'
      << "removed_trivial\t" << report.removed_trivial << '\n'
      << "removed_url\t" << report.removed_url << '\n'
      << "removed_fanout\t" << report.removed_fanout << '\n'
      << "removed_cap\t" << report.removed_cap << '\n';
  return 0;
}

int run_build_vocab(const VocabArgs& a, std::ostream& out, const Log& log) {
  check_output(a.out);
  const Side side = a.side == "post" ? Side::kPost : Side::kResponse;
  const auto loaded = load_pairs(a.pairs);
  const auto built = build_vocab(loaded.pairs, side, a.cap);
  save_vocab(a.out, built.vocab);
  log("wrote ", built.vocab.size(), " tokens to ", a.out);
  out << "tokens\t" << built.vocab.size() << '\n'
      << "coverage\t" << format_real(built.coverage) << '\n';
  return 0;
}

int run_train(TrainArgs a, const Common& common, std::ostream& out, const Log& log) {
  TrainConfig& cfg = a.config;
  cfg.seed = common.seed;
  cfg.threads = common.threads;
  cfg.validate();
  const Scheme scheme = parse_scheme(a.scheme);
  const bool pretrained = !a.init_from_loc.empty() || !a.init_from_glo.empty();
  if (pretrained && (a.init_from_loc.empty() || a.init_from_glo.empty())) {
    throw Error("train: --init-from-loc and --init-from-glo must be given together");
  }
  if (pretrained && scheme != Scheme::kHybrid) {
    throw Error("train: pretrained initialization requires --scheme hyb");
  }
  if (a.freeze_copied_encoder && !pretrained) {
    throw Error("train: --freeze-copied-encoder requires pretrained initialization");
  }
  check_output(a.out);
  if (!a.log.empty()) check_output(a.log);

  const auto loaded = load_pairs(a.pairs);
  const Vocabulary post_vocab = load_vocab(a.post_vocab, Side::kPost);
  const Vocabulary response_vocab = load_vocab(a.response_vocab, Side::kResponse);
  if (loaded.pairs.empty()) throw Error("train: no pairs in " + a.pairs);

  std::optional<ModelParams> initial;
  if (pretrained) {
    const ModelParams loc = load_checkpoint(a.init_from_loc);
    const ModelParams glo = load_checkpoint(a.init_from_glo);
    if (loc.dims.post_vocab != post_vocab.size() ||
        loc.dims.response_vocab != response_vocab.size()) {
      throw Error("train: pretrained checkpoints do not match the vocabulary files");
    }
    Rng rng(cfg.seed);
    HybridInit init = init_hybrid_from_pretrained(loc, glo, rng, cfg.init_lo, cfg.init_hi);
    for (const auto& [name, prov] : init.provenance) log("init ", name, ": ", provenance_name(prov));
    if (a.freeze_copied_encoder) cfg.frozen = hybrid_encoder_tensors();
    initial = std::move(init.params);
  }

  std::ofstream log_file;
  if (!a.log.empty()) {
    log_file.open(a.log, std::ios::binary);
    if (!log_file) throw Error("train: cannot write log " + a.log);
  }
  std::ostream& log_stream = a.log.empty() ? out : log_file;
  auto on_epoch = [&](const EpochStats& e) {
    log_stream << e.epoch << '\t' << format_real(e.mean_nll) << '\t' << format_real(e.perplexity)
               << '\n';
    log_stream.flush();
  };
  const TrainResult result = train(loaded.pairs, post_vocab, response_vocab, cfg, scheme,
                                   initial ? &*initial : nullptr, on_epoch);
  save_checkpoint(result.params, a.out, cfg.precision_bytes);
  log("saved ", scheme_name(scheme), " checkpoint to ", a.out, " (",
      parameter_count(result.params), " parameters)");
  return 0;
}

void print_hypotheses(std::ostream& out, const std::string& format, std::size_t post_index,
                      const std::vector<Hypothesis>& hyps, const Vocabulary& vocab,
                      std::size_t nbest) {
  const std::size_t n = nbest == 0 ? hyps.size() : std::min(nbest, hyps.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string tokens = join_tokens(decode(hyps[i].tokens, vocab));
    if (format == "jsonl") {
      nlohmann::json rec{{"post", post_index},
                         {"rank", i + 1},
                         {"log_prob", hyps[i].log_prob},
                         {"tokens", tokens},
                         {"finished", hyps[i].finished}};
      out << rec.dump() << '\n';
    } else {
      out << i + 1 << '\t' << format_real(hyps[i].log_prob) << '\t' << tokens << '\n';
    }
  }
}

int run_generate(const GenerateArgs& a, bool multi, std::ostream& out, const Log& log) {
  if (a.options.beam < 1) throw Error("generate: --beam must be at least 1");
  const LoadedModel m = load_model(a.checkpoint, a.post_vocab, a.response_vocab);
  const auto posts = read_posts(a.posts, m.post_vocab);
  log("decoding ", posts.size(), " posts with beam ", a.options.beam);
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto hyps = multi ? multi_response(m.params, posts[i], a.options)
                            : beam_search(m.params, posts[i], a.options);
    if (a.format == "text" && i > 0) out << '\n';
    print_hypotheses(out, a.format, i, hyps, m.response_vocab, a.nbest);
  }
  return 0;
}

int run_perplexity(const PerplexityArgs& a, std::ostream& out) {
  const LoadedModel m = load_model(a.checkpoint, a.post_vocab, a.response_vocab);
  const auto loaded = load_pairs(a.pairs);
  const auto encoded = encode_pairs(loaded.pairs, m.post_vocab, m.response_vocab,
                                    a.max_response_tokens);
  if (encoded.empty()) throw Error("perplexity: no pairs in " + a.pairs);
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& p : encoded) {
    nll -= sequence_log_likelihood(m.params, p.post, std::span(p.response).subspan(1));
    tokens += p.response.size() - 1;
  }
  const double mean = nll / static_cast<double>(tokens);
  out << "pairs\t" << encoded.size() << '\n'
      << "tokens\t" << tokens << '\n'
      << "mean_nll\t" << format_real(mean) << '\n'
      << "perplexity\t" << format_real(std::exp(mean)) << '\n';
  return 0;
}

int run_grad_check(const GradCheckArgs& a, const Common& common, std::ostream& out) {
  GradCheckOptions options;
  options.epsilon = a.epsilon;
  const auto report = grad_check(parse_scheme(a.scheme), common.seed, a.tolerance, options);
  out << "tensor\telements\tmax_rel_error\tstatus\n";
  for (const auto& t : report.tensors) {
    out << t.name << '\t' << t.elements << '\t' << format_general(t.max_rel_error) << '\t'
        << (t.pass ? "pass" : "FAIL") << '\n';
  }
  out << "result\t" << (report.pass ? "pass" : "fail") << '\n';
  return report.pass ? 0 : 1;
}

int run_kappa(const KappaArgs& a, std::ostream& out) {
  const AnnotationTable table = load_annotations(a.annotations, parse_categories(a.categories));
  const ScoreSummary summary = score_summary(table);
  out << "items\t" << table.items() << '\n' << "raters\t" << table.raters() << '\n';
  out << "mean_score\t" << format_real(summary.mean_score) << '\n';
  for (std::size_t c = 0; c < table.categories().size(); ++c) {
    out << "fraction\t" << table.categories()[c].name << '\t' << format_real(summary.fractions[c])
        << '\n';
  }
  out << "kappa\t" << format_real(fleiss_kappa(table)) << '\n';
  return 0;
}

int run_friedman(const std::string& path, std::ostream& out) {
  const ScoreMatrix m = load_score_matrix(path);
  const FriedmanResult r = friedman_test(m.scores);
  out << "subjects\t" << m.scores.rows() << '\n'
      << "statistic\t" << format_general(r.statistic) << '\n'
      << "dof\t" << r.dof << '\n'
      << "p_value\t" << format_general(r.p_value) << '\n';
  for (std::size_t j = 0; j < m.treatments.size(); ++j) {
    out << "average_rank\t" << m.treatments[j] << '\t' << format_real(r.average_ranks[j], 4) << '\n';
  }
  return 0;
}

int run_inspect(const std::string& path, std::ostream& out) {
  const ModelParams p = load_checkpoint(path);
  std::ifstream in(path, std::ios::binary);
  in.seekg(9);
  const int precision = in.get();
  const Dims& d = p.dims;
  out << "scheme\t" << scheme_name(p.scheme) << '\n'
      << "precision\t" << precision << '\n'
      << "dims\td_h=" << d.hidden << " d_emb=" << d.embed << " d_a=" << d.attention
      << " d_L=" << d.stimulus << " V_post=" << d.post_vocab << " V_resp=" << d.response_vocab
      << '\n'
      << "parameters\t" << parameter_count(p) << '\n';
  for (const auto& t : tensors(p)) {
    out << t.name << '\t'
        << (t.is_vector ? std::to_string(t.tensor->rows()) : t.tensor->shape_string()) << '\t'
        << format_general(std::sqrt(squared_norm(t.tensor->data()))) << '\n';
  }
  return 0;
}

// Config entries become --key=value arguments unless the command line already
// names the key.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string config_path;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      config_path = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (config_path.empty()) return kept;
  const auto given = [&](const std::string& key) {
    for (const auto& a : kept) {
      if (a == "--" + key || a.starts_with("--" + key + "=")) return true;
    }
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config(config_path)) {
    if (!given(key)) extra.push_back("--" + key + "=" + value);
  }
  // After the subcommand name so subcommand options resolve.
  const auto insert_at = kept.empty() ? kept.end() : kept.begin() + 1;
  kept.insert(insert_at, extra.begin(), extra.end());
  return kept;
}

}  // namespace

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config: expected key = value on line " + std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("config: empty key on line " + std::to_string(line_no));
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Common common;
  const Log log(err, common.quiet);

  CLI::App app{"nrm: train, decode and evaluate attention-based post-to-response models",
               "nrm"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--quiet,-q", common.quiet, "Suppress logs on stderr");
  app.add_option("--seed", common.seed, "Seed for every source of randomness");
  app.add_option("--threads", common.threads, "Worker threads for gradient computation")
      ->check(CLI::PositiveNumber);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  const auto scheme_check = CLI::IsMember({"glo", "loc", "hyb"});

  CleanArgs clean;
  auto* clean_cmd = app.add_subcommand("clean", "Apply corpus cleaning rules to a pair file");
  clean_cmd->add_option("--pairs", clean.pairs, "Input TSV")->required()->check(CLI::ExistingFile);
  clean_cmd->add_option("--out", clean.out, "Cleaned TSV")->required();
  clean_cmd->add_option("--min-response-tokens", clean.config.min_response_tokens);
  clean_cmd->add_option("--stoplist", clean.stoplist, "Comma-separated trivial responses");
  clean_cmd->add_option("--max-url-tokens", clean.config.max_url_tokens);
  clean_cmd->add_option("--max-fanout", clean.config.max_response_fanout);
  clean_cmd->add_option("--max-per-post", clean.config.max_responses_per_post)
      ->check(CLI::PositiveNumber);

  VocabArgs vocab;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build one side's vocabulary");
  vocab_cmd->add_option("--pairs", vocab.pairs)->required()->check(CLI::ExistingFile);
  vocab_cmd->add_option("--side", vocab.side)->check(CLI::IsMember({"post", "response"}));
  vocab_cmd->add_option("--cap", vocab.cap)->check(CLI::PositiveNumber);
  vocab_cmd->add_option("--out", vocab.out)->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model by minibatch SGD");
  train_cmd->add_option("--pairs", tr.pairs)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--post-vocab", tr.post_vocab)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--response-vocab", tr.response_vocab)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--scheme", tr.scheme)->check(scheme_check);
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "Training log path (default stdout)");
  train_cmd->add_option("--lr", tr.config.learning_rate)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch-size", tr.config.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tr.config.epochs);
  train_cmd->add_option("--clip", tr.config.clip_norm)->check(CLI::PositiveNumber);
  train_cmd->add_option("--precision", tr.config.precision_bytes)->check(CLI::IsMember({4, 8}));
  train_cmd->add_option("--init-lo", tr.config.init_lo);
  train_cmd->add_option("--init-hi", tr.config.init_hi);
  train_cmd->add_option("--max-response-len", tr.config.max_response_tokens);
  train_cmd->add_option("--hidden", tr.config.dims.hidden)->check(CLI::PositiveNumber);
  train_cmd->add_option("--embed", tr.config.dims.embed)->check(CLI::PositiveNumber);
  train_cmd->add_option("--attention-dim", tr.config.dims.attention)->check(CLI::PositiveNumber);
  train_cmd->add_option("--stimulus-dim", tr.config.dims.stimulus)->check(CLI::PositiveNumber);
  train_cmd->add_option("--init-from-loc", tr.init_from_loc)->check(CLI::ExistingFile);
  train_cmd->add_option("--init-from-glo", tr.init_from_glo)->check(CLI::ExistingFile);
  train_cmd->add_flag("--freeze-copied-encoder", tr.freeze_copied_encoder);

  GenerateArgs gen;
  auto add_generate = [&](const char* name, const char* help, std::size_t default_beam) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--checkpoint", gen.checkpoint)->required()->check(CLI::ExistingFile);
    cmd->add_option("--post-vocab", gen.post_vocab)->required()->check(CLI::ExistingFile);
    cmd->add_option("--response-vocab", gen.response_vocab)->required()->check(CLI::ExistingFile);
    cmd->add_option("--posts", gen.posts, "One post per line (text before a TAB)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--beam", gen.options.beam)->default_val(default_beam)->check(CLI::PositiveNumber);
    cmd->add_option("--max-len", gen.options.max_len);
    cmd->add_flag("--suppress-unk", gen.options.suppress_unk);
    cmd->add_option("--nbest", gen.nbest, "Hypotheses printed per post (0 = all)");
    cmd->add_option("--format", gen.format)->check(CLI::IsMember({"text", "jsonl"}));
    return cmd;
  };
  auto* generate_cmd = add_generate("generate", "Beam-search responses", 10);
  auto* multi_cmd = add_generate("multi-generate", "Best response per distinct first word", 500);

  PerplexityArgs ppl;
  auto* ppl_cmd = app.add_subcommand("perplexity", "Per-token NLL and perplexity on a pair file");
  ppl_cmd->add_option("--checkpoint", ppl.checkpoint)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("--post-vocab", ppl.post_vocab)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("--response-vocab", ppl.response_vocab)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("--pairs", ppl.pairs)->required()->check(CLI::ExistingFile);
  ppl_cmd->add_option("--max-response-len", ppl.max_response_tokens);

  GradCheckArgs gc;
  auto* gc_cmd = app.add_subcommand("grad-check", "Compare analytic and numeric gradients");
  gc_cmd->add_option("--scheme", gc.scheme)->check(scheme_check);
  gc_cmd->add_option("--tolerance", gc.tolerance);
  gc_cmd->add_option("--epsilon", gc.epsilon)->check(CLI::PositiveNumber);

  KappaArgs kappa;
  auto* kappa_cmd = app.add_subcommand("kappa", "Score summary and Fleiss' kappa");
  kappa_cmd->add_option("--annotations", kappa.annotations)->required()->check(CLI::ExistingFile);
  kappa_cmd->add_option("--categories", kappa.categories, "name=score,... in category order");

  std::string scores_path;
  auto* friedman_cmd = app.add_subcommand("friedman", "Friedman test on a score matrix");
  friedman_cmd->add_option("--scores", scores_path)->required()->check(CLI::ExistingFile);

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "Print checkpoint tensor table");
  inspect_cmd->add_option("--checkpoint", inspect_path)->required()->check(CLI::ExistingFile);

  try {
    std::vector<std::string> args = merge_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    err << "nrm: error: usage: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "nrm: error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (clean_cmd->parsed()) return run_clean(clean, out, log);
    if (vocab_cmd->parsed()) return run_build_vocab(vocab, out, log);
    if (train_cmd->parsed()) return run_train(tr, common, out, log);
    if (generate_cmd->parsed()) return run_generate(gen, false, out, log);
    if (multi_cmd->parsed()) return run_generate(gen, true, out, log);
    if (ppl_cmd->parsed()) return run_perplexity(ppl, out);
    if (gc_cmd->parsed()) return run_grad_check(gc, common, out);
    if (kappa_cmd->parsed()) return run_kappa(kappa, out);
    if (friedman_cmd->parsed()) return run_friedman(scores_path, out);
    if (inspect_cmd->parsed()) return run_inspect(inspect_path, out);
  } catch (const std::exception& e) {
    err << "nrm: error: " << e.what() << '\n';
    return 1;
  }
  err << "nrm: error: no subcommand\n";
  return 2;
}

}  // namespace nrm::cli
