#ifndef REMARK_VERIFICATION_H_
#define REMARK_VERIFICATION_H_

#include <cstddef>
#include <string>

#include "remark/corpus.h"
#include "remark/message.h"
#include "remark/model.h"

namespace remark {

// Decoded bits from a (possibly attacked) token sequence.
BitMessage extract_from_text(const WatermarkModel& model,
                             const TokenSequence& tokens);

std::size_t matching_bits(const BitMessage& expected,
                          const BitMessage& extracted);

// Fraction of matching bits. Throws on a length mismatch.
double wer(const BitMessage& expected, const BitMessage& extracted);

// One-proportion z-statistic of `matches` out of `bits` against p = 0.5.
double z_score(std::size_t bits, std::size_t matches);
double z_score_from_rate(std::size_t bits, double match_rate);

// Upper-tail standard normal probability of z.
double one_sided_p(double z);

struct VerificationReport {
  BitMessage expected;
  BitMessage extracted;
  std::size_t matches = 0;
  double wer = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double threshold = 4.0;
  bool watermarked = false;
};

VerificationReport make_report(const BitMessage& expected,
                               const BitMessage& extracted,
                               double threshold = 4.0);

// Verdict is "watermarked" iff z >= threshold.
VerificationReport verify(const WatermarkModel& model,
                          const TokenSequence& tokens,
                          const BitMessage& expected, double threshold = 4.0);

std::string report_to_json(const VerificationReport& report);

}  // namespace remark

#endif  // REMARK_VERIFICATION_H_
