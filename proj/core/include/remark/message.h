#ifndef REMARK_MESSAGE_H_
#define REMARK_MESSAGE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "remark/rng.h"

namespace remark {

// Fixed-length binary signature.
class BitMessage {
 public:
  BitMessage() = default;
  // Throws if any element is not 0 or 1.
  explicit BitMessage(std::vector<std::uint8_t> bits);

  // Parses a string of '0'/'1' characters.
  static BitMessage parse(std::string_view bits);
  // Bernoulli(0.5) per bit.
  static BitMessage random(std::size_t length, Rng& rng);

  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  BitMessage complement() const;
  std::string to_string() const;

  friend bool operator==(const BitMessage&, const BitMessage&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

}  // namespace remark

#endif  // REMARK_MESSAGE_H_
