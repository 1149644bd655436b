#include "remark/verification.h"

#include <cmath>

#include "json.hpp"
#include "remark/error.h"

namespace remark {

BitMessage extract_from_text(const WatermarkModel& model,
                             const TokenSequence& tokens) {
  return extract_tokens(model, tokens).bits;
}

std::size_t matching_bits(const BitMessage& expected,
                          const BitMessage& extracted) {
  if (expected.size() != extracted.size()) {
    throw Error("message lengths differ");
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    n += (expected[i] == extracted[i]);
  }
  return n;
}

double wer(const BitMessage& expected, const BitMessage& extracted) {
  if (expected.empty()) throw Error("empty message");
  return static_cast<double>(matching_bits(expected, extracted)) /
         static_cast<double>(expected.size());
}

double z_score(std::size_t bits, std::size_t matches) {
  if (bits == 0) throw Error("z-score needs at least one bit");
  if (matches > bits) throw Error("more matches than bits");
  const double n = static_cast<double>(bits);
  return (static_cast<double>(matches) - 0.5 * n) / std::sqrt(0.25 * n);
}

double z_score_from_rate(std::size_t bits, double match_rate) {
  if (bits == 0) throw Error("z-score needs at least one bit");
  if (!(match_rate >= 0.0 && match_rate <= 1.0)) {
    throw Error("match rate must lie in [0, 1]");
  }
  const double n = static_cast<double>(bits);
  return (match_rate - 0.5) * n / std::sqrt(0.25 * n);
}

double one_sided_p(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

VerificationReport make_report(const BitMessage& expected,
                               const BitMessage& extracted, double threshold) {
  VerificationReport r;
  r.expected = expected;
  r.extracted = extracted;
  r.matches = matching_bits(expected, extracted);
  r.wer = wer(expected, extracted);
  r.z = z_score(expected.size(), r.matches);
  r.p_value = one_sided_p(r.z);
  r.threshold = threshold;
  r.watermarked = r.z >= threshold;
  return r;
}

VerificationReport verify(const WatermarkModel& model,
                          const TokenSequence& tokens,
                          const BitMessage& expected, double threshold) {
  if (expected.size() != static_cast<std::size_t>(model.config().message_bits)) {
    throw Error("message length does not match the model");
  }
  return make_report(expected, extract_from_text(model, tokens), threshold);
}

std::string report_to_json(const VerificationReport& r) {
  nlohmann::json obj = {
      {"expected", r.expected.to_string()},
      {"extracted", r.extracted.to_string()},
      {"matches", r.matches},
      {"bits", r.expected.size()},
      {"wer", r.wer},
      {"z", r.z},
      {"p_one_sided", r.p_value},
      {"threshold", r.threshold},
      {"verdict", r.watermarked ? "watermarked" : "not_watermarked"},
  };
  return obj.dump();
}

}  // namespace remark
