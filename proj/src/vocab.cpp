#include "palx/vocab.hpp"

#include <algorithm>
#include <cctype>

namespace palx {

std::vector<std::string> split_tokens(const std::string& label) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < label.size()) {
    char c = label[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '\\') {
      size_t j = i + 1;
      while (j < label.size() && std::isalpha(static_cast<unsigned char>(label[j]))) ++j;
      if (j == i + 1)
        throw TokenError("backslash not followed by a command name in label: " + label);
      out.push_back(label.substr(i, j - i));
      i = j;
    } else {
      out.push_back(std::string(1, c));
      ++i;
    }
  }
  return out;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  Vocabulary v;
  v.by_id_ = {"<pad>", "<bos>", "<eos>"};
  for (std::string& t : tokens) {
    if (t.empty()) throw ContractError("empty token in vocabulary");
    v.by_id_.push_back(std::move(t));
  }
  for (int i = 0; i < static_cast<int>(v.by_id_.size()); ++i) v.by_token_[v.by_id_[i]] = i;
  if (v.by_token_.size() != v.by_id_.size())
    throw ContractError("vocabulary tokens collide with reserved special names");
  return v;
}

Vocabulary Vocabulary::from_labels(const std::vector<std::string>& labels) {
  std::vector<std::string> tokens;
  for (const std::string& l : labels) {
    std::vector<std::string> t = split_tokens(l);
    tokens.insert(tokens.end(), t.begin(), t.end());
  }
  return from_tokens(std::move(tokens));
}

int Vocabulary::id(const std::string& tok) const {
  auto it = by_token_.find(tok);
  if (it == by_token_.end()) throw TokenError("token not in vocabulary: '" + tok + "'");
  return it->second;
}

const std::string& Vocabulary::token(int tid) const {
  if (tid < 0 || tid >= size())
    throw IndexError("token id " + std::to_string(tid) + " out of range for vocabulary of " +
                     std::to_string(size()));
  return by_id_[tid];
}

std::vector<int> Vocabulary::encode(const std::string& label) const {
  return encode_tokens(split_tokens(label));
}

std::vector<int> Vocabulary::encode_tokens(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) out.push_back(id(t));
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int tid : ids) {
    if (tid == kPad || tid == kBos || tid == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(tid);
  }
  return out;
}

std::vector<std::string> Vocabulary::ordered_tokens() const {
  return std::vector<std::string>(by_id_.begin() + 3, by_id_.end());
}

}  // namespace palx
