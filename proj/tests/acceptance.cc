// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Progress goes to stderr.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "../tools/cli.h"
#include "oracles.h"
#include "remark/attacks.h"
#include "remark/checkpoint.h"
#include "remark/corpus.h"
#include "remark/evaluation.h"
#include "remark/insertion.h"
#include "remark/training.h"
#include "remark/verification.h"
#include "test_util.h"

namespace remark {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- 1: relaxation --------------------------------------------------------

Verdict check_relaxation() {
  const auto start = Clock::now();
  Rng rng(101);
  double worst_sum = 0.0;
  for (double tau : {0.1, 0.3, 1.0, 2.0}) {
    DistributionSequence d(64, 50);
    for (nn::Index i = 0; i < d.size(); ++i) d.data()[i] = static_cast<float>(rng.uniform_open());
    for (nn::Index r = 0; r < d.rows(); ++r) d.row(r) /= d.row(r).sum();
    const auto out = gumbel_softmax(d, tau, rng);
    for (nn::Index r = 0; r < out.rows(); ++r) {
      worst_sum = std::max(worst_sum, std::abs(static_cast<double>(out.row(r).sum()) - 1.0));
    }
  }

  DistributionSequence d(3, 3);
  d << 0.7f, 0.2f, 0.1f, 0.5f, 0.25f, 0.25f, 1.0f / 3, 1.0f / 3, 1.0f / 3;
  const nn::Matrix<float> zero = nn::Matrix<float>::Zero(3, 3);
  const double identity_err = (gumbel_softmax(d, 1.0, zero) - d).cwiseAbs().maxCoeff();

  // Noise-free tau = 0.1 raises each probability to the tenth power.
  const auto sharp = gumbel_softmax(d, 0.1, zero);
  double closed_form_err = 0.0;
  for (nn::Index r = 0; r < 3; ++r) {
    double total = 0.0;
    for (nn::Index c = 0; c < 3; ++c) total += std::pow(static_cast<double>(d(r, c)), 10.0);
    for (nn::Index c = 0; c < 3; ++c) {
      const double expect = std::pow(static_cast<double>(d(r, c)), 10.0) / total;
      closed_form_err = std::max(closed_form_err, std::abs(sharp(r, c) - expect));
    }
  }
  const bool frozen = std::abs(sharp(0, 0) - 0.99999637) < 1e-6 &&
                      std::abs(sharp(0, 1) - 3.625e-6) < 1e-6 &&
                      std::abs(sharp(0, 2) - 3.54e-9) < 1e-6;
  const double t = seconds_since(start);
  const bool ok = worst_sum <= 1e-6 && identity_err <= 1e-6 && closed_form_err <= 1e-6 &&
                  frozen && t < 1.0;
  return {ok, "row-sum err " + fmt("%.2g", worst_sum) + ", identity err " +
                  fmt("%.2g", identity_err) + ", tau=0.1 err " + fmt("%.2g", closed_form_err) +
                  ", " + fmt("%.3f", t) + " s"};
}

// --- 2: z-score and p-value -----------------------------------------------

Verdict check_z_score() {
  const auto start = Clock::now();
  const bool exact = z_score(16, 16) == 4.0 && z_score(64, 32) == 0.0 && z_score(64, 64) == 8.0;
  const double p = one_sided_p(4.0);
  const double t = seconds_since(start);
  const bool ok = exact && p >= 2.9e-5 && p <= 3.3e-5 && t < 1.0;
  return {ok, std::string("z(16,16)=") + fmt("%g", z_score(16, 16)) + " z(64,32)=" +
                  fmt("%g", z_score(64, 32)) + " z(64,64)=" + fmt("%g", z_score(64, 64)) +
                  ", p(z=4)=" + fmt("%.4g", p) + ", " + fmt("%.3f", t) + " s"};
}

// --- 3: losses --------------------------------------------------------------

Verdict check_losses() {
  bool ok = true;
  const TokenSequence t = {4, 150, 199, 12, 30};
  DistributionSequence onehot = DistributionSequence::Zero(5, 200);
  for (int i = 0; i < 5; ++i) onehot(i, t[i]) = 1.0f;
  ok &= std::abs(semantic_loss(t, onehot)) <= 1e-6;
  const DistributionSequence uniform = DistributionSequence::Constant(5, 200, 1.0f / 200);
  ok &= std::abs(semantic_loss(t, uniform) - std::log(200.0)) <= 1e-6;
  DistributionSequence half = DistributionSequence::Constant(5, 200, 0.5f / 199);
  for (int i = 0; i < 5; ++i) half(i, t[i]) = 0.5f;
  ok &= std::abs(semantic_loss(t, half) - std::log(2.0)) <= 1e-6;

  const auto m = BitMessage::parse("11010010");
  std::vector<double> exact(m.bits().begin(), m.bits().end()), flipped;
  for (auto b : m.bits()) flipped.push_back(1.0 - b);
  auto two_off = exact;
  two_off[1] = 1.0 - two_off[1];
  two_off[6] = 1.0 - two_off[6];
  ok &= message_loss(m, exact, exact, 0.7, 0.3) == 0.0;
  ok &= std::abs(message_loss(m, flipped, exact, 0.7, 0.3) - 5.6) < 1e-12;
  ok &= message_loss(m, flipped, two_off, 0.0, 1.0) == 2.0;

  ok &= total_loss(0.0, 0.0, 0.5, 0.5) == 0.0;
  ok &= total_loss(2.0, 3.0, 0.5, 0.5) == 2.5;
  ok &= total_loss(1.25, 7.0, 1.0, 0.0) == 1.25;
  Rng rng(303);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double s1 = rng.uniform() * 6, m1 = rng.uniform() * 6;
    const double s2 = rng.uniform() * 6, m2 = rng.uniform() * 6;
    const double a = rng.uniform() * 4 - 2, w1 = rng.uniform();
    const double lhs = total_loss(s1 + a * s2, m1 + a * m2, w1, 1 - w1);
    const double rhs = total_loss(s1, m1, w1, 1 - w1) + a * total_loss(s2, m2, w1, 1 - w1);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  ok &= worst <= 1e-12;
  return {ok, "closed forms and worked examples, linearity err " + fmt("%.2g", worst)};
}

// --- 4: gradients -----------------------------------------------------------

Verdict check_gradients() {
  const auto start = Clock::now();
  auto model = BasicWatermarkModel<double>(oracle::micro_gradient_config());
  const auto r = oracle::check_gradients(model, oracle::micro_step_inputs(3), 1e-6, 1e-5);
  const double t = seconds_since(start);
  const bool ok = r.max_relative_error <= 1e-4 && t < 30.0;
  return {ok, std::to_string(r.entries) + " entries, max rel err " +
                  fmt("%.3g", r.max_relative_error) + " (abs " +
                  fmt("%.2g", r.max_absolute_error) + "), " + fmt("%.2f", t) + " s"};
}

// --- 5: beam search ---------------------------------------------------------

Verdict check_beam_search() {
  const auto start = Clock::now();
  Rng rng(505);
  int mismatches = 0, checks = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const int v = 1 + static_cast<int>(rng.index(4));
    const int len = 1 + static_cast<int>(rng.index(4));
    nn::Matrix<float> d(len, v);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(len));
    for (int r = 0; r < len; ++r) {
      double total = 0.0;
      for (int c = 0; c < v; ++c) total += (d(r, c) = static_cast<float>(0.02 + rng.uniform()));
      d.row(r) /= static_cast<float>(total);
      for (int c = 0; c < v; ++c) rows[r].push_back(d(r, c));
    }
    const auto ranked = oracle::enumerate_ranked(rows);
    for (int b = 1; b <= static_cast<int>(ranked.size()) + 1; ++b) {
      const auto beams = beam_search(d, b);
      const std::size_t n = std::min<std::size_t>(b, ranked.size());
      bool same = beams.size() == n;
      for (std::size_t i = 0; same && i < n; ++i) {
        same = beams[i] == TokenSequence(ranked[i].begin(), ranked[i].end());
      }
      mismatches += !same;
      ++checks;
    }
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 10.0,
          std::to_string(checks) + " (instance, width) pairs, " + std::to_string(mismatches) +
              " mismatches, " + fmt("%.2f", t) + " s"};
}

// --- toy setting shared by 6-9 ------------------------------------------------

struct ToySetting {
  Vocabulary vocab;
  Corpus corpus;
  std::vector<TokenSequence> heldout;  // fresh sentences for 8 and 9
  ModelConfig model;
  TrainConfig train;
};

ToySetting make_toy() {
  ToySetting s;
  s.corpus = split_corpus(generate_synthetic_corpus(2000, 20, 7), 0.8, 7);
  s.vocab = Vocabulary::build(s.corpus.train, 200);
  for (const auto& text : generate_synthetic_corpus(500, 20, 70007)) {
    s.heldout.push_back(tokenize(text, s.vocab, 20));
  }
  s.model.vocab_size = static_cast<int>(s.vocab.size());
  s.model.message_bits = 4;
  s.model.max_tokens = 20;
  s.model.d_model = 64;
  s.model.heads = 4;
  s.model.encoder_layers = 2;
  s.model.decoder_layers = 2;
  s.model.ff_width = 128;
  s.model.extractor_width = 64;
  s.model.extractor_heads = 8;
  s.model.extractor_layers = 3;
  s.model.extractor_ff_width = 128;
  s.model.seed = 1;
  s.train.max_tokens = 20;
  s.train.seed = 3;
  s.train.eval_every = 25;
  return s;
}

TrainResult train_toy(const ToySetting& s, const TrainConfig& cfg, const char* tag) {
  return train(WatermarkModel(s.model), s.vocab, s.corpus, cfg, [tag](const TrainRecord& r) {
    if (!std::isnan(r.heldout_wer)) {
      std::cerr << "  [" << tag << "] epoch " << r.epoch << " L_S=" << r.semantic_loss
                << " L_M=" << r.message_loss << " heldout_wer=" << r.heldout_wer << std::endl;
    }
  });
}

Verdict check_toy_training(const ToySetting& s, const TrainResult& r, double seconds) {
  const auto& first = r.records.front();
  const auto& last = r.records.back();
  const bool vocab_ok = s.vocab.size() == 200;
  const bool ok = vocab_ok && last.heldout_wer >= 0.95 &&
                  last.semantic_loss < first.semantic_loss &&
                  last.message_loss < first.message_loss && seconds <= 1800.0;
  return {ok, "|V|=" + std::to_string(s.vocab.size()) + ", " +
                  std::to_string(r.records.size()) + " epochs, held-out WER " +
                  fmt("%.4f", last.heldout_wer) + ", L_S " + fmt("%.3f", first.semantic_loss) +
                  "->" + fmt("%.3f", last.semantic_loss) + ", L_M " +
                  fmt("%.3f", first.message_loss) + "->" + fmt("%.3f", last.message_loss) +
                  ", " + fmt("%.0f", seconds) + " s"};
}

// --- 7: integrity -------------------------------------------------------------

Verdict check_integrity(const ToySetting& s, const WatermarkModel& model) {
  std::vector<TokenSequence> clean;
  for (const auto& text : s.corpus.test) clean.push_back(tokenize(text, s.vocab, 20));
  const std::size_t trials = 2000;
  const double w = integrity_sweep(model, clean, trials, 707);
  return {std::abs(w - 0.5) <= 0.03,
          "clean-text WER " + fmt("%.4f", w) + " over " + std::to_string(trials) + " trials"};
}

// --- 9: insertion contract ----------------------------------------------------

Verdict check_insertion(const ToySetting& s, const WatermarkModel& model) {
  int violations = 0, greedy_mismatch = 0;
  for (int i = 0; i < 100; ++i) {
    const auto& tokens = s.heldout[static_cast<std::size_t>(i)];
    Rng rng(Rng::derive(909, static_cast<std::uint64_t>(i)));
    const auto msg = BitMessage::random(4, rng);
    std::vector<InsertionCandidate> log;
    const auto out = watermark(model, tokens, msg, InsertionConfig{}, rng,
                               [&](const InsertionCandidate& c) { log.push_back(c); });
    double best = -1.0;
    for (const auto& c : log) {
      const double acc = wer(msg, extract_tokens(model, c.tokens).bits);
      if (acc != c.bit_accuracy) ++violations;
      best = std::max(best, acc);
    }
    if (log.size() != 25 || out.candidates_examined != 25 || out.bit_accuracy != best) {
      ++violations;
    }

    InsertionConfig degenerate;
    degenerate.beam_width = 1;
    degenerate.iterations = 1;
    degenerate.temperatures = {1.0};
    degenerate.inject_noise = false;
    degenerate.mask_pct = 0.0;
    const auto g = watermark(model, tokens, msg, degenerate, rng);
    if (g.tokens != greedy_decode(watermark_distribution(model, tokens, msg))) ++greedy_mismatch;
  }
  return {violations == 0 && greedy_mismatch == 0,
          "100 inputs x 25 candidates, " + std::to_string(violations) +
              " contract violations, " + std::to_string(greedy_mismatch) +
              " degenerate-run mismatches"};
}

// --- 8: robustness ------------------------------------------------------------

struct AttackScores {
  std::vector<double> z_marked, z_clean, z_del6, z_del20;
  std::vector<double> wer_post;  // mean post-attack WER per sample
};

AttackScores score_attacks(const ToySetting& s, const WatermarkModel& model) {
  AttackScores a;
  for (std::size_t i = 0; i < s.heldout.size(); ++i) {
    const auto& tokens = s.heldout[i];
    Rng rng(Rng::derive(808, i));
    const auto msg = BitMessage::random(4, rng);
    const auto marked = watermark(model, tokens, msg, InsertionConfig{}, rng).tokens;
    Rng attack_rng(Rng::derive(818, i));
    const auto d6 = attack_delete(marked, 0.06, attack_rng);
    const auto d20 = attack_delete(marked, 0.20, attack_rng);
    const auto add6 = attack_add(marked, 0.06, attack_rng, s.vocab);
    const auto r6 = verify(model, d6, msg), r20 = verify(model, d20, msg);
    a.z_marked.push_back(verify(model, marked, msg).z);
    a.z_clean.push_back(verify(model, tokens, msg).z);
    a.z_del6.push_back(r6.z);
    a.z_del20.push_back(r20.z);
    a.wer_post.push_back((r6.wer + r20.wer + verify(model, add6, msg).wer) / 3.0);
  }
  return a;
}

double gap_p(const std::vector<double>& better, const std::vector<double>& worse,
             const std::vector<double>& reference) {
  const auto pb = placement_values(better, reference);
  const auto pw = placement_values(worse, reference);
  std::vector<double> diff(pb.size());
  for (std::size_t i = 0; i < pb.size(); ++i) diff[i] = pb[i] - pw[i];
  return paired_one_sided_p(diff);
}

double mean(const std::vector<double>& v) {
  double t = 0.0;
  for (double x : v) t += x;
  return t / static_cast<double>(v.size());
}

Verdict check_robustness(const ToySetting& s, const WatermarkModel& model,
                         const WatermarkModel& twin) {
  const auto a = score_attacks(s, model);
  const double auc_clean = detection_auc(a.z_marked, a.z_clean);
  const double auc6 = detection_auc(a.z_del6, a.z_clean);
  const double auc20 = detection_auc(a.z_del20, a.z_clean);
  const double p1 = gap_p(a.z_marked, a.z_del6, a.z_clean);
  const double p2 = gap_p(a.z_del6, a.z_del20, a.z_clean);
  const auto b = score_attacks(s, twin);
  const double post = mean(a.wer_post), post_twin = mean(b.wer_post);
  const bool ok = auc_clean >= auc6 && auc6 >= auc20 && p1 < 0.01 && p2 < 0.01 &&
                  post > post_twin;
  return {ok, "AUC none/del6/del20 " + fmt("%.4f", auc_clean) + "/" + fmt("%.4f", auc6) + "/" +
                  fmt("%.4f", auc20) + ", gap p " + fmt("%.2g", p1) + "/" + fmt("%.2g", p2) +
                  ", post-attack WER " + fmt("%.4f", post) + " vs transform-free " +
                  fmt("%.4f", post_twin) + " (n=" + std::to_string(s.heldout.size()) + ")"};
}

// --- 10: reproducibility ------------------------------------------------------

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0 && code != cli::kVerificationFailed) std::cerr << err.str();
  return code;
}

Verdict check_reproducibility() {
  testing::TempDir root("acceptance_repro");
  const std::string config = R"({"epochs": 4, "message_bits": 4, "max_tokens": 20,
    "d_model": 64, "heads": 4, "ff_width": 128, "extractor_width": 64,
    "extractor_heads": 8, "extractor_layers": 3, "extractor_ff_width": 128,
    "vocab_max_size": 200, "seed": 3, "model_seed": 1, "eval_every": 4})";
  std::vector<std::vector<std::string>> artifacts;
  for (const char* run : {"a", "b"}) {
    const auto dir = root.path() / run;
    std::filesystem::create_directories(dir);
    auto f = [&](const char* name) { return (dir / name).string(); };
    write_file(f("cfg.json"), config);
    bool ok = cli({"synth", "--count", "600", "--seed", "5", "--out", f("corpus.jsonl")}) == 0;
    ok = ok && cli({"train", "--config", f("cfg.json"), "--corpus", f("corpus.jsonl"),
                    "--out", f("m.ckpt")}) == 0;
    write_file(f("input.jsonl"), "");
    {
      // First 50 corpus lines as watermarking input.
      const auto corpus = read_file(f("corpus.jsonl"));
      std::size_t pos = 0;
      for (int i = 0; i < 50; ++i) pos = corpus.find('\n', pos) + 1;
      write_file(f("input.jsonl"), corpus.substr(0, pos));
    }
    ok = ok && cli({"watermark", "--checkpoint", f("m.ckpt"), "--input", f("input.jsonl"),
                    "--seed", "11", "--out", f("wm.jsonl")}) == 0;
    ok = ok && cli({"attack", "--input", f("wm.jsonl"), "--attack", "delete", "--rate",
                    "0.06", "--checkpoint", f("m.ckpt"), "--seed", "12", "--out",
                    f("del.jsonl")}) == 0;
    const int v = cli({"verify", "--checkpoint", f("m.ckpt"), "--input", f("wm.jsonl"),
                       "--out", f("verify.jsonl")});
    ok = ok && (v == 0 || v == cli::kVerificationFailed);
    ok = ok && cli({"evaluate", "--checkpoint", f("m.ckpt"), "--input", f("wm.jsonl"),
                    "--input", f("del.jsonl"), "--out", f("report.json")}) == 0;
    if (!ok) return {false, std::string("pipeline run ") + run + " failed"};
    artifacts.push_back({read_file(f("m.ckpt")), read_file(f("wm.jsonl")),
                         read_file(f("del.jsonl")), read_file(f("verify.jsonl")),
                         read_file(f("report.json"))});
  }
  const char* names[] = {"checkpoint", "watermarked", "attacked", "verify", "report"};
  std::string differing;
  for (std::size_t i = 0; i < artifacts[0].size(); ++i) {
    if (artifacts[0][i] != artifacts[1][i]) differing += std::string(" ") + names[i];
  }
  return {differing.empty(),
          differing.empty()
              ? "checkpoint " + cli::git_blob_sha1(artifacts[0][0]).substr(0, 12) +
                    ", watermarked, attacked, verify and report outputs identical"
              : "differing:" + differing};
}

}  // namespace
}  // namespace remark

int main() {
  using namespace remark;
  int failures = 0;
  auto report = [&](int id, const char* name, const Verdict& v) {
    std::cout << "criterion " << id << " " << (v.pass ? "PASS" : "FAIL") << " [" << name
              << "] " << v.detail << std::endl;
    failures += !v.pass;
  };
  auto guarded = [](const std::function<Verdict()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Verdict{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "relaxation", guarded(check_relaxation));
  report(2, "z-score", guarded(check_z_score));
  report(3, "losses", guarded(check_losses));
  report(4, "gradient check", guarded(check_gradients));
  report(5, "beam search oracle", guarded(check_beam_search));

  const auto toy = make_toy();
  std::optional<TrainResult> trained, twin;
  report(6, "toy training", guarded([&] {
           const auto start = Clock::now();
           trained = train_toy(toy, toy.train, "main");
           return check_toy_training(toy, *trained, seconds_since(start));
         }));
  auto needs_model = [&](const std::function<Verdict(const WatermarkModel&)>& f) {
    return guarded([&] {
      if (!trained) return Verdict{false, "toy model unavailable"};
      return f(trained->model);
    });
  };
  report(7, "integrity", needs_model([&](const WatermarkModel& m) { return check_integrity(toy, m); }));
  report(8, "robustness", needs_model([&](const WatermarkModel& m) {
           TrainConfig free = toy.train;
           free.transform_mix = {0.0, 0.0, 0.0};
           twin = train_toy(toy, free, "transform-free");
           return check_robustness(toy, m, twin->model);
         }));
  report(9, "insertion contract",
         needs_model([&](const WatermarkModel& m) { return check_insertion(toy, m); }));
  report(10, "reproducibility", guarded(check_reproducibility));

  std::cout << (10 - failures) << "/10 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
