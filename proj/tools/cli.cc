#include "cli.h"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "remark/attacks.h"
#include "remark/checkpoint.h"
#include "remark/error.h"
#include "remark/evaluation.h"
#include "remark/insertion.h"
#include "remark/training.h"
#include "remark/verification.h"
#include "remark/word_vectors.h"

namespace remark::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kConfigEnv = "REMARK_CONFIG";

// Thrown for bad flags or inputs; maps to kUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void ensure_writable(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw UsageError(path.string() + " already exists (use --force)");
  }
}

std::vector<json> read_jsonl(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("missing input " + path.string());
  std::istringstream in(read_file(path));
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) +
                       ": invalid JSON");
    }
    if (!out.back().is_object()) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) +
                       ": expected a JSON object");
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::string string_field(const json& record, const char* key,
                         std::size_t index) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw UsageError("record " + std::to_string(index) + " has no \"" + key +
                     "\" string");
  }
  return it->get<std::string>();
}

// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index is
// processed independently, so results do not depend on the job count. The
// exception of the lowest failing index is rethrown.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(workers, n); ++t) {
    threads.emplace_back(worker);
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

class Manifest {
 public:
  Manifest(std::string command, bool timings)
      : command_(std::move(command)), timings_(timings),
        start_(Clock::now()) {}

  json& config() { return config_; }
  void seed(const std::string& name, std::uint64_t value) {
    seeds_[name] = value;
  }
  void input(const std::string& role, const fs::path& path) {
    inputs_[role] = {{"path", path.string()},
                     {"sha1", git_blob_sha1(read_file(path))}};
  }
  void output(const std::string& role, const fs::path& path) {
    outputs_[role] = {{"path", path.string()},
                      {"sha1", git_blob_sha1(read_file(path))}};
  }
  void timing(const std::string& name, double seconds) {
    timing_values_[name] = seconds;
  }

  // Written next to `primary` as <primary>.manifest.json.
  void write(const fs::path& primary) {
    json doc = {{"command", command_},
                {"version", kVersion},
                {"config", config_},
                {"seeds", seeds_},
                {"inputs", inputs_},
                {"outputs", outputs_}};
    if (timings_) {
      timing_values_["total"] = seconds_since(start_);
      doc["timings"] = timing_values_;
    }
    write_file(fs::path(primary.string() + ".manifest.json"),
               doc.dump(2) + "\n");
  }

 private:
  std::string command_;
  bool timings_;
  Clock::time_point start_;
  json config_ = json::object();
  json seeds_ = json::object();
  json inputs_ = json::object();
  json outputs_ = json::object();
  json timing_values_ = json::object();
};

Checkpoint load_with_vocab(const fs::path& path) {
  if (!fs::exists(path)) throw UsageError("missing checkpoint " + path.string());
  auto ck = load_checkpoint(path);
  if (!ck.vocab) {
    throw IncompatibleArtifact(path.string() + " carries no vocabulary");
  }
  return ck;
}

// --- message specs ---------------------------------------------------------

class MessageSource {
 public:
  MessageSource(const std::string& spec, std::size_t bits) : bits_(bits) {
    if (spec == "random") {
      random_ = true;
    } else if (spec.rfind("random:", 0) == 0) {
      random_ = true;
      std::size_t n = 0;
      try {
        n = std::stoul(spec.substr(7));
      } catch (const std::exception&) {
        throw UsageError("bad message spec \"" + spec + "\"");
      }
      if (n != bits) {
        throw UsageError("message spec asks for " + std::to_string(n) +
                         " bits but the model carries " + std::to_string(bits));
      }
    } else if (!spec.empty() && spec[0] == '@') {
      const fs::path path = spec.substr(1);
      if (!fs::exists(path)) throw UsageError("missing message file " + path.string());
      std::istringstream in(read_file(path));
      std::string line;
      while (std::getline(in, line)) {
        const auto words = split_words(line);
        if (!words.empty()) fixed_.push_back(parse_bits(words.front()));
      }
      if (fixed_.empty()) throw UsageError("message file is empty");
    } else {
      fixed_.push_back(parse_bits(spec));
    }
  }

  // Fixed messages cycle through the records.
  BitMessage for_record(std::size_t index, Rng& rng) const {
    if (random_) return BitMessage::random(bits_, rng);
    return fixed_[index % fixed_.size()];
  }

  BitMessage parse_bits(const std::string& text) const {
    BitMessage m;
    try {
      m = BitMessage::parse(text);
    } catch (const Error& e) {
      throw UsageError(std::string("bad message: ") + e.what());
    }
    if (m.size() != bits_) {
      throw UsageError("message \"" + text + "\" has " +
                       std::to_string(m.size()) + " bits; the model carries " +
                       std::to_string(bits_));
    }
    return m;
  }

 private:
  std::size_t bits_;
  bool random_ = false;
  std::vector<BitMessage> fixed_;
};

BitMessage record_message(const json& record, std::size_t index,
                          std::size_t bits) {
  const std::string text = string_field(record, "message", index);
  BitMessage m;
  try {
    m = BitMessage::parse(text);
  } catch (const Error& e) {
    throw UsageError("record " + std::to_string(index) + ": " + e.what());
  }
  if (m.size() != bits) {
    throw UsageError("record " + std::to_string(index) +
                     ": message length does not match the model");
  }
  return m;
}

// --- shared insertion flags ------------------------------------------------

struct InsertionFlags {
  int beam = 5;
  int iters = 5;
  std::string temps;
  double mask_pct = 0.5;
  bool no_noise = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--beam", beam, "Beam width")->check(CLI::PositiveNumber);
    cmd->add_option("--iters", iters, "Search iterations")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--temps", temps,
                    "Comma-separated temperatures, one per iteration");
    cmd->add_option("--mask-pct", mask_pct, "Mask fraction during insertion")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--no-noise", no_noise, "Disable Gumbel noise injection");
  }

  // Without --temps the default schedule is truncated, or padded with its
  // last value, to the iteration count.
  InsertionConfig config(std::uint64_t seed) const {
    InsertionConfig c;
    c.beam_width = beam;
    c.iterations = iters;
    c.mask_pct = mask_pct;
    c.inject_noise = !no_noise;
    c.seed = seed;
    if (temps.empty()) {
      const auto base = c.temperatures;
      c.temperatures.clear();
      for (int k = 0; k < iters; ++k) {
        c.temperatures.push_back(
            base[std::min<std::size_t>(static_cast<std::size_t>(k), base.size() - 1)]);
      }
    } else {
      c.temperatures.clear();
      std::stringstream ss(temps);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          c.temperatures.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw UsageError("bad temperature \"" + item + "\"");
        }
      }
    }
    try {
      c.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  json to_json(const InsertionConfig& c) const {
    return {{"beam", c.beam_width},
            {"iters", c.iterations},
            {"temps", c.temperatures},
            {"mask_pct", c.mask_pct},
            {"noise", c.inject_noise}};
  }
};

// --- train -----------------------------------------------------------------

struct TrainOptions {
  std::string config;
  std::string corpus;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool timings = false;
  bool progress = false;
};

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  Manifest manifest("train", o.timings);
  std::string config_path = o.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kConfigEnv)) config_path = env;
  }
  RunConfig run;
  json raw = json::object();
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) {
      throw UsageError("missing config " + config_path);
    }
    const std::string text = read_file(config_path);
    try {
      run = parse_run_config(text);
      raw = json::parse(text);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    manifest.input("config", config_path);
  }
  if (o.seed) {
    run.train.seed = *o.seed;
    if (!raw.contains("model_seed")) run.model.seed = *o.seed;
  }
  if (!fs::exists(o.corpus)) throw UsageError("missing corpus " + o.corpus);
  ensure_writable(o.out, o.force);
  const fs::path loss_path = o.out + ".loss.csv";
  ensure_writable(loss_path, o.force);
  manifest.input("corpus", o.corpus);

  std::vector<std::string> texts;
  try {
    texts = load_jsonl_texts(o.corpus);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Corpus corpus =
      split_corpus(std::move(texts), run.train_fraction, run.train.seed);
  if (corpus.train.empty()) throw UsageError("corpus has no training records");
  const std::size_t max_size =
      run.model.vocab_size > 0 ? static_cast<std::size_t>(run.model.vocab_size)
                               : static_cast<std::size_t>(run.vocab_max_size);
  const Vocabulary vocab = Vocabulary::build(corpus.train, max_size);
  run.model.vocab_size = static_cast<int>(vocab.size());
  run.model.max_tokens = std::max(run.model.max_tokens, run.train.max_tokens);
  try {
    run.model.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const auto start = Clock::now();
  const WatermarkModel initial(run.model);
  auto result = train(initial, vocab, corpus, run.train,
                      [&](const TrainRecord& r) {
                        if (!o.progress) return;
                        err << "epoch " << r.epoch << " L_S=" << r.semantic_loss
                            << " L_M=" << r.message_loss
                            << " total=" << r.total_loss
                            << " heldout_wer=" << r.heldout_wer << std::endl;
                      });
  manifest.timing("train", seconds_since(start));

  save_checkpoint(o.out, result.model, &vocab);
  write_file(loss_path, loss_trace_csv(result.records));

  manifest.config() = json::parse(model_config_to_json(run.model));
  manifest.config()["train"] = json::parse(train_config_to_json(run.train));
  manifest.config()["train_fraction"] = run.train_fraction;
  manifest.seed("train", run.train.seed);
  manifest.seed("model", run.model.seed);
  manifest.output("checkpoint", o.out);
  manifest.output("loss_trace", loss_path);
  manifest.write(o.out);
  const auto& last = result.records.empty() ? TrainRecord{} : result.records.back();
  out << "trained " << result.records.size() << " epochs, final heldout_wer "
      << last.heldout_wer << "\n";
  return kOk;
}

// --- watermark -------------------------------------------------------------

struct WatermarkOptions {
  std::string checkpoint, input, out;
  std::string message = "random";
  std::uint64_t seed = 0;
  int jobs = 1;
  bool force = false;
  bool timings = false;
  InsertionFlags insertion;
};

int cmd_watermark(const WatermarkOptions& o, std::ostream& out) {
  Manifest manifest("watermark", o.timings);
  const auto ck = load_with_vocab(o.checkpoint);
  const auto records = read_jsonl(o.input);
  ensure_writable(o.out, o.force);
  const auto cfg = o.insertion.config(o.seed);
  const auto bits = static_cast<std::size_t>(ck.model.config().message_bits);
  const MessageSource source(o.message, bits);
  const auto max_len = static_cast<std::size_t>(ck.model.config().max_tokens);

  const auto start = Clock::now();
  std::vector<json> results(records.size());
  parallel_for(records.size(), o.jobs, [&](std::size_t i) {
    const std::string text = string_field(records[i], "text", i);
    const auto tokens = tokenize(text, *ck.vocab, max_len);
    if (tokens.empty()) {
      throw UsageError("record " + std::to_string(i) + " has empty text");
    }
    Rng rng(Rng::derive(o.seed, i));
    const BitMessage message = records[i].contains("message")
                                   ? record_message(records[i], i, bits)
                                   : source.for_record(i, rng);
    const auto wm = watermark(ck.model, tokens, message, cfg, rng);
    results[i] = {{"text", text},
                  {"watermarked_text", detokenize(wm.tokens, *ck.vocab)},
                  {"message", message.to_string()},
                  {"accuracy", wm.bit_accuracy}};
  });
  manifest.timing("watermark", seconds_since(start));
  write_file(o.out, to_jsonl(results));

  manifest.config() = o.insertion.to_json(cfg);
  manifest.config()["message"] = o.message;
  manifest.seed("seed", o.seed);
  manifest.input("checkpoint", o.checkpoint);
  manifest.input("input", o.input);
  manifest.output("output", o.out);
  manifest.write(o.out);
  out << "watermarked " << results.size() << " records\n";
  return kOk;
}

// --- verify ----------------------------------------------------------------

struct VerifyOptions {
  std::string checkpoint, input, out;
  std::string field;
  double threshold = 4.0;
  int jobs = 1;
  bool force = false;
  bool timings = false;
};

// Explicit field, else the first of attacked_text, watermarked_text, text.
std::string pick_text(const json& record, const std::string& field,
                      std::size_t index) {
  if (!field.empty()) return string_field(record, field.c_str(), index);
  for (const char* key : {"attacked_text", "watermarked_text", "text"}) {
    auto it = record.find(key);
    if (it != record.end() && it->is_string()) return it->get<std::string>();
  }
  throw UsageError("record " + std::to_string(index) + " has no text field");
}

int cmd_verify(const VerifyOptions& o, std::ostream& out) {
  Manifest manifest("verify", o.timings);
  const auto ck = load_with_vocab(o.checkpoint);
  const auto records = read_jsonl(o.input);
  if (!o.out.empty()) ensure_writable(o.out, o.force);
  const auto bits = static_cast<std::size_t>(ck.model.config().message_bits);
  std::vector<BitMessage> messages;
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    messages.push_back(record_message(records[i], i, bits));
    texts.push_back(pick_text(records[i], o.field, i));
  }
  const auto start = Clock::now();
  std::vector<VerificationReport> reports(records.size());
  parallel_for(records.size(), o.jobs, [&](std::size_t i) {
    const auto tokens = tokenize(texts[i], *ck.vocab,
                                 std::numeric_limits<std::size_t>::max());
    if (tokens.empty()) {
      throw UsageError("record " + std::to_string(i) + " has empty text");
    }
    reports[i] = verify(ck.model, tokens, messages[i], o.threshold);
  });
  manifest.timing("verify", seconds_since(start));
  std::string lines;
  bool all = true;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto j = json::parse(report_to_json(reports[i]));
    j["index"] = i;
    lines += j.dump() + "\n";
    all = all && reports[i].watermarked;
  }
  if (o.out.empty()) {
    out << lines;
  } else {
    write_file(o.out, lines);
    manifest.config() = {{"threshold", o.threshold}, {"field", o.field}};
    manifest.input("checkpoint", o.checkpoint);
    manifest.input("input", o.input);
    manifest.output("reports", o.out);
    manifest.write(o.out);
  }
  return all ? kOk : kVerificationFailed;
}

// --- attack ----------------------------------------------------------------

struct AttackOptions {
  std::string input, out, attack;
  std::string checkpoint, vocab, synonyms, adversary;
  std::optional<double> rate;
  double floor = 0.85;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool force = false;
  bool timings = false;
  InsertionFlags insertion;
};

std::string source_text(const json& record, std::size_t index) {
  for (const char* key : {"watermarked_text", "text"}) {
    auto it = record.find(key);
    if (it != record.end() && it->is_string()) return it->get<std::string>();
  }
  throw UsageError("record " + std::to_string(index) +
                   " has no watermarked_text or text");
}

int cmd_attack(const AttackOptions& o, std::ostream& out) {
  Manifest manifest("attack", o.timings);
  AttackConfig ac;
  try {
    ac.kind = parse_attack_kind(o.attack);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  ac.rate = o.rate.value_or(0.06);
  ac.acceptor_floor = o.floor;
  ac.seed = o.seed;
  try {
    ac.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto records = read_jsonl(o.input);
  ensure_writable(o.out, o.force);

  std::optional<Vocabulary> vocab;
  if (!o.checkpoint.empty()) {
    vocab = load_with_vocab(o.checkpoint).vocab;
    manifest.input("checkpoint", o.checkpoint);
  } else if (!o.vocab.empty()) {
    if (!fs::exists(o.vocab)) throw UsageError("missing vocabulary " + o.vocab);
    vocab = Vocabulary::load(o.vocab);
    manifest.input("vocab", o.vocab);
  }
  const bool token_level = ac.kind == AttackKind::kDelete ||
                           ac.kind == AttackKind::kAdd ||
                           ac.kind == AttackKind::kReplace;
  if (token_level && !vocab) {
    throw UsageError("this attack needs --checkpoint or --vocab");
  }

  std::vector<std::string> sources;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sources.push_back(source_text(records[i], i));
  }

  // Synonyms and the semantic scorer come from a supplied table or from
  // word vectors fitted on the texts at hand.
  SynonymTable synonyms;
  SemanticScorer scorer;
  if (ac.kind == AttackKind::kReplace || ac.kind == AttackKind::kRephrase) {
    std::vector<std::string> corpus = sources;
    for (const auto& r : records) {
      if (r.contains("text") && r["text"].is_string()) {
        corpus.push_back(r["text"].get<std::string>());
      }
    }
    WordVectors vectors;
    if (!corpus.empty()) vectors = WordVectors::train(corpus, {});
    if (!o.synonyms.empty()) {
      if (!fs::exists(o.synonyms)) {
        throw UsageError("missing synonym table " + o.synonyms);
      }
      synonyms = SynonymTable::load(o.synonyms);
      manifest.input("synonyms", o.synonyms);
    } else if (!corpus.empty()) {
      synonyms = SynonymTable::from_vectors(vectors, 5, 0.3);
    }
    scorer = embedding_cosine_scorer(vectors);
  }

  std::optional<Checkpoint> adversary;
  InsertionConfig icfg;
  if (ac.kind == AttackKind::kRewatermark) {
    if (o.adversary.empty()) throw UsageError("rewatermark needs --adversary");
    adversary = load_with_vocab(o.adversary);
    manifest.input("adversary", o.adversary);
    icfg = o.insertion.config(o.seed);
  }

  json params = {{"seed", ac.seed}};
  if (token_level) params["rate"] = ac.rate;
  if (ac.kind == AttackKind::kRephrase) params["floor"] = ac.acceptor_floor;
  if (ac.kind == AttackKind::kReplace) params["neighbor_rank"] = 1;
  if (ac.kind == AttackKind::kRewatermark) {
    params = o.insertion.to_json(icfg);
    params["seed"] = ac.seed;
  }

  const auto start = Clock::now();
  std::vector<json> results(records.size());
  parallel_for(records.size(), o.jobs, [&](std::size_t i) {
    Rng rng(Rng::derive(o.seed, i));
    const std::string& text = sources[i];
    json extra = json::object();
    std::string attacked;
    const auto unbounded = std::numeric_limits<std::size_t>::max();
    switch (ac.kind) {
      case AttackKind::kDelete:
        attacked = detokenize(
            attack_delete(tokenize(text, *vocab, unbounded), ac.rate, rng),
            *vocab);
        break;
      case AttackKind::kAdd:
        attacked = detokenize(
            attack_add(tokenize(text, *vocab, unbounded), ac.rate, rng, *vocab),
            *vocab);
        break;
      case AttackKind::kReplace:
        attacked = detokenize(attack_replace(tokenize(text, *vocab, unbounded),
                                             ac.rate, rng, synonyms, *vocab),
                              *vocab);
        break;
      case AttackKind::kRephrase: {
        const auto paraphraser =
            rule_based_paraphraser(synonyms, Rng::derive(o.seed, i));
        const auto r =
            attack_rephrase(text, paraphraser, scorer, ac.acceptor_floor);
        attacked = r.text;
        extra = {{"score", r.score},
                 {"accepted", r.accepted},
                 {"paraphraser_failed", r.paraphraser_failed}};
        break;
      }
      case AttackKind::kRewatermark: {
        const auto fresh = BitMessage::random(
            static_cast<std::size_t>(adversary->model.config().message_bits),
            rng);
        attacked = attack_rewatermark_text(text, adversary->model,
                                           *adversary->vocab, fresh, icfg, rng);
        extra = {{"adversary_message", fresh.to_string()}};
        break;
      }
    }
    json rec = records[i];
    rec["watermarked_text"] = text;
    rec["attacked_text"] = attacked;
    rec["attack"] = attack_name(ac.kind);
    rec["params"] = params;
    if (!extra.empty()) rec["attack_info"] = extra;
    results[i] = std::move(rec);
  });
  manifest.timing("attack", seconds_since(start));
  write_file(o.out, to_jsonl(results));

  manifest.config() = {{"attack", attack_name(ac.kind)}, {"params", params}};
  manifest.seed("seed", o.seed);
  manifest.input("input", o.input);
  manifest.output("output", o.out);
  manifest.write(o.out);
  out << "attacked " << results.size() << " records with "
      << attack_name(ac.kind) << "\n";
  return kOk;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateOptions {
  std::string checkpoint, out;
  std::vector<std::string> inputs;
  double threshold = 4.0;
  int jobs = 1;
  bool force = false;
  bool timings = false;
  bool plots = false;
};

std::string roc_svg(const std::vector<RocPoint>& points,
                    const std::string& title) {
  constexpr double kSize = 320.0, kPad = 40.0;
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << kSize + 2 * kPad << "\" height=\"" << kSize + 2 * kPad << "\">\n";
  svg << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kPad + kSize << "\" x2=\""
      << kPad + kSize << "\" y2=\"" << kPad
      << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" "
         "points=\"";
  for (const auto& p : points) {
    svg << kPad + p.fpr * kSize << ',' << kPad + (1.0 - p.tpr) * kSize << ' ';
  }
  svg << "\"/>\n";
  svg << "<text x=\"" << kPad << "\" y=\"" << kPad - 12 << "\">" << title
      << "</text>\n";
  svg << "<text x=\"" << kPad + kSize / 2 - 10 << "\" y=\"" << kSize + 2 * kPad - 10
      << "\">FPR</text>\n";
  svg << "<text x=\"6\" y=\"" << kPad + kSize / 2 << "\">TPR</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  Manifest manifest("evaluate", o.timings);
  const auto ck = load_with_vocab(o.checkpoint);
  ensure_writable(o.out, o.force);
  const auto bits = static_cast<std::size_t>(ck.model.config().message_bits);

  std::vector<json> records;
  for (const auto& path : o.inputs) {
    auto part = read_jsonl(path);
    records.insert(records.end(), part.begin(), part.end());
    manifest.input("input:" + path, path);
  }
  if (records.empty()) throw UsageError("nothing to evaluate");

  struct Row {
    std::string attack;
    std::string original, marked;
    BitMessage message;
    double wer = 0.0, z = 0.0, z_clean = 0.0, bleu = 0.0, semantic = 0.0;
  };
  std::vector<Row> rows(records.size());
  std::vector<std::string> all_texts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = rows[i];
    r.message = record_message(records[i], i, bits);
    r.original = string_field(records[i], "text", i);
    r.marked = pick_text(records[i], "", i);
    r.attack = records[i].value("attack", std::string("none"));
    all_texts.push_back(r.original);
    all_texts.push_back(r.marked);
  }
  const auto scorer =
      embedding_cosine_scorer(WordVectors::train(all_texts, {}));
  const auto unbounded = std::numeric_limits<std::size_t>::max();
  const auto start = Clock::now();
  parallel_for(rows.size(), o.jobs, [&](std::size_t i) {
    auto& r = rows[i];
    const auto marked = tokenize(r.marked, *ck.vocab, unbounded);
    const auto clean = tokenize(r.original, *ck.vocab, unbounded);
    if (marked.empty() || clean.empty()) {
      throw UsageError("record " + std::to_string(i) + " has empty text");
    }
    const auto rep = verify(ck.model, marked, r.message, o.threshold);
    r.wer = rep.wer;
    r.z = rep.z;
    r.z_clean = verify(ck.model, clean, r.message, o.threshold).z;
    r.bleu = bleu4(r.marked, r.original);
    r.semantic = semantic_score(r.original, r.marked, scorer);
  });
  const double elapsed = seconds_since(start);

  MetricReport report;
  report.samples = rows.size();
  std::vector<double> z, z_clean;
  double wer = 0.0, bleu = 0.0, sem = 0.0;
  std::map<std::string, std::vector<double>> by_attack;
  for (const auto& r : rows) {
    wer += r.wer;
    bleu += r.bleu;
    sem += r.semantic;
    z.push_back(r.z);
    z_clean.push_back(r.z_clean);
    by_attack[r.attack].push_back(r.z);
  }
  const double n = static_cast<double>(rows.size());
  report.mean_wer = wer / n;
  report.mean_bleu4 = bleu / n;
  report.mean_semantic_score = sem / n;
  report.z = summarize(z);
  if (o.timings) report.seconds_per_sample = elapsed / n;

  for (const auto& [attack, scores] : by_attack) {
    report.auc_per_attack[attack] = detection_auc(scores, z_clean);
    const auto points = roc_curve(scores, z_clean);
    const fs::path csv = o.out + ".roc." + attack + ".csv";
    ensure_writable(csv, o.force);
    write_file(csv, roc_csv(points));
    manifest.output("roc:" + attack, csv);
    if (o.plots) {
      const fs::path svg = o.out + ".roc." + attack + ".svg";
      ensure_writable(svg, o.force);
      write_file(svg, roc_svg(points, "ROC (" + attack + ")"));
      manifest.output("plot:" + attack, svg);
    }
  }
  write_file(o.out, metric_report_to_json(report) + "\n");
  manifest.config() = {{"threshold", o.threshold}};
  manifest.input("checkpoint", o.checkpoint);
  manifest.output("report", o.out);
  manifest.write(o.out);
  out << metric_report_to_json(report) << "\n";
  return kOk;
}

// --- synth -----------------------------------------------------------------

struct SynthOptions {
  std::size_t count = 2000;
  std::size_t length = 20;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  ensure_writable(o.out, o.force);
  std::vector<json> records;
  for (auto& s : generate_synthetic_corpus(o.count, o.length, o.seed)) {
    records.push_back({{"text", std::move(s)}});
  }
  write_file(o.out, to_jsonl(records));
  Manifest manifest("synth", false);
  manifest.config() = {{"count", o.count}, {"length", o.length}};
  manifest.seed("seed", o.seed);
  manifest.output("corpus", o.out);
  manifest.write(o.out);
  out << "wrote " << records.size() << " sentences\n";
  return kOk;
}

}  // namespace

std::string git_blob_sha1(std::string_view contents) {
  const std::string header = "blob " + std::to_string(contents.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, header.data(), header.size() + 1) != 1 ||
      EVP_DigestUpdate(ctx, contents.data(), contents.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &length) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-1 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char b = digest[i];
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
  }
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Neural text watermarking: train, insert, verify, attack, "
               "evaluate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Train a watermark model");
  train_cmd->add_option("--config", train_o.config,
                        std::string("Run config JSON (default: $") + kConfigEnv +
                            ")");
  train_cmd->add_option("--corpus", train_o.corpus, "Corpus JSONL")->required();
  train_cmd->add_option("--out", train_o.out, "Output checkpoint")->required();
  train_cmd->add_option("--seed", train_o.seed, "Override the config seed");
  train_cmd->add_flag("--force", train_o.force, "Overwrite outputs");
  train_cmd->add_flag("--timings", train_o.timings, "Record timings");
  train_cmd->add_flag("--progress", train_o.progress, "Per-epoch log on stderr");

  WatermarkOptions wm_o;
  auto* wm_cmd = app.add_subcommand("watermark", "Insert messages into texts");
  wm_cmd->add_option("--checkpoint", wm_o.checkpoint)->required();
  wm_cmd->add_option("--input", wm_o.input, "JSONL with text[, message]")
      ->required();
  wm_cmd->add_option("--out", wm_o.out)->required();
  wm_cmd->add_option("--message", wm_o.message,
                     "Bit string, random, random:N or @file");
  wm_cmd->add_option("--seed", wm_o.seed);
  wm_cmd->add_option("--jobs", wm_o.jobs)->check(CLI::PositiveNumber);
  wm_cmd->add_flag("--force", wm_o.force);
  wm_cmd->add_flag("--timings", wm_o.timings);
  wm_o.insertion.add(wm_cmd);

  VerifyOptions v_o;
  auto* v_cmd = app.add_subcommand("verify", "Verify messages in texts");
  v_cmd->add_option("--checkpoint", v_o.checkpoint)->required();
  v_cmd->add_option("--input", v_o.input, "JSONL with message and text")
      ->required();
  v_cmd->add_option("--out", v_o.out, "Report JSONL (default stdout)");
  v_cmd->add_option("--field", v_o.field, "Text field to verify");
  v_cmd->add_option("--threshold", v_o.threshold, "z-score threshold");
  v_cmd->add_option("--jobs", v_o.jobs)->check(CLI::PositiveNumber);
  v_cmd->add_flag("--force", v_o.force);
  v_cmd->add_flag("--timings", v_o.timings);

  AttackOptions a_o;
  auto* a_cmd = app.add_subcommand("attack", "Perturb watermarked texts");
  a_cmd->add_option("--input", a_o.input)->required();
  a_cmd->add_option("--out", a_o.out)->required();
  a_cmd->add_option("--attack", a_o.attack,
                    "delete|add|replace|rephrase|rewatermark")
      ->required();
  a_cmd->add_option("--rate", a_o.rate, "Per-token probability");
  a_cmd->add_option("--checkpoint", a_o.checkpoint, "Vocabulary source");
  a_cmd->add_option("--vocab", a_o.vocab, "Vocabulary file");
  a_cmd->add_option("--synonyms", a_o.synonyms, "Synonym table");
  a_cmd->add_option("--adversary", a_o.adversary, "Adversary checkpoint");
  a_cmd->add_option("--floor", a_o.floor, "Rephrase acceptance floor");
  a_cmd->add_option("--seed", a_o.seed);
  a_cmd->add_option("--jobs", a_o.jobs)->check(CLI::PositiveNumber);
  a_cmd->add_flag("--force", a_o.force);
  a_cmd->add_flag("--timings", a_o.timings);
  a_o.insertion.add(a_cmd);

  EvaluateOptions e_o;
  auto* e_cmd = app.add_subcommand("evaluate", "Aggregate metrics");
  e_cmd->add_option("--checkpoint", e_o.checkpoint)->required();
  e_cmd->add_option("--input", e_o.inputs, "Watermark or attack JSONL")
      ->required();
  e_cmd->add_option("--out", e_o.out, "Report JSON")->required();
  e_cmd->add_option("--threshold", e_o.threshold);
  e_cmd->add_option("--jobs", e_o.jobs)->check(CLI::PositiveNumber);
  e_cmd->add_flag("--force", e_o.force);
  e_cmd->add_flag("--timings", e_o.timings);
  e_cmd->add_flag("--plots", e_o.plots, "Write SVG ROC plots");

  SynthOptions s_o;
  auto* s_cmd = app.add_subcommand("synth", "Write a synthetic toy corpus");
  s_cmd->add_option("--count", s_o.count);
  s_cmd->add_option("--length", s_o.length);
  s_cmd->add_option("--seed", s_o.seed);
  s_cmd->add_option("--out", s_o.out)->required();
  s_cmd->add_flag("--force", s_o.force);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o, out, err);
    if (*wm_cmd) return cmd_watermark(wm_o, out);
    if (*v_cmd) return cmd_verify(v_o, out);
    if (*a_cmd) return cmd_attack(a_o, out);
    if (*e_cmd) return cmd_evaluate(e_o, out);
    if (*s_cmd) return cmd_synth(s_o, out);
  } catch (const IncompatibleArtifact& e) {
    err << "error: " << e.what() << "\n";
    return kIncompatible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace remark::cli
