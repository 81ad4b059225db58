#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "palx/errors.hpp"

namespace palx {

// Splits a LaTeX label into tokens: backslash-word commands are single tokens,
// every other non-space character stands alone. Whitespace only separates.
std::vector<std::string> split_tokens(const std::string& label);

// Token <-> id bijection with reserved specials. Ordering is sorted-unique
// over the construction tokens, so rebuilding from the same corpus is stable.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary() = default;

  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary from_labels(const std::vector<std::string>& labels);

  int size() const { return static_cast<int>(by_id_.size()); }
  bool contains(const std::string& tok) const { return by_token_.count(tok) > 0; }
  int id(const std::string& tok) const;
  const std::string& token(int id) const;

  // Plain token ids, no BOS/EOS.
  std::vector<int> encode(const std::string& label) const;
  std::vector<int> encode_tokens(const std::vector<std::string>& tokens) const;
  // Space-joined tokens; PAD/BOS/EOS are skipped.
  std::string decode(const std::vector<int>& ids) const;

  // Non-special tokens in id order (id = index + 3).
  std::vector<std::string> ordered_tokens() const;

 private:
  std::vector<std::string> by_id_;
  std::unordered_map<std::string, int> by_token_;
};

}  // namespace palx
