// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdlm/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mdlm::inline MDLM_ABI {

inline constexpr int kPadId = 0;
inline constexpr int kMaskId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kDefaultMaxLength = 64;

/// Token <-> id bijection. Ids 0..2 are always PAD, MASK, UNK; the rest are
/// ordered by descending corpus count, then lexicographically.
class Vocabulary {
 public:
  Vocabulary();

  /// Throws Error("empty_corpus") when raw_sentences is empty. Tokens seen
  /// fewer than min_count times are left out and therefore read as UNK.
  static Vocabulary build(const std::vector<std::string>& raw_sentences, int min_count = 1);
  static Vocabulary from_json(const nlohmann::json& j);

  /// {token: id}
  nlohmann::json to_json() const;

  int size() const { return static_cast<int>(id_to_token_.size()); }
  /// UNK for out-of-vocabulary tokens.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }
  const std::string& token(int id) const;
  /// FNV-1a over the id-ordered token list; stored in checkpoints.
  std::uint64_t hash() const;

 private:
  void add(const std::string& token);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Lowercases and splits on whitespace; every ASCII punctuation character is
/// its own token.
std::vector<std::string> split_words(std::string_view text);

struct TokenSequence {
  std::vector<int> ids;
  std::string source;

  std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSequence& other) const { return ids == other.ids; }
};

/// Throws Error("empty_sentence") if text holds no tokens. Output is
/// truncated to max_length ids.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, int max_length = kDefaultMaxLength);
/// Space-joined tokens; PAD ids are dropped.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);
std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab);

enum class Split { Train, Validation };

struct Example {
  TokenSequence tokens;
  std::map<std::string, std::string> attributes;  // field -> value, e.g. food -> Japanese
};

/// Tokenized sentences of one split together with the counts tf-idf and
/// entropy need: per-token document frequency and total frequency.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Example> examples, Split split, int vocab_size);

  /// JSONL with {"text": ..., "attributes": {...}?} per line; blank lines are
  /// skipped. Throws Error("parse") naming the offending line.
  static Corpus load(const std::filesystem::path& path, const Vocabulary& vocab, Split split = Split::Train,
                     int max_length = kDefaultMaxLength);

  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  Split split() const { return split_; }
  const Example& example(std::size_t i) const { return examples_[i]; }
  const TokenSequence& sentence(std::size_t i) const { return examples_[i].tokens; }
  const std::vector<Example>& examples() const { return examples_; }
  int vocab_size() const { return static_cast<int>(token_frequency_.size()); }

  /// Number of sentences containing the token.
  std::int64_t document_frequency(int id) const;
  /// Total occurrences of the token across the split.
  std::int64_t token_frequency(int id) const;
  std::int64_t total_tokens() const { return total_tokens_; }

 private:
  std::vector<Example> examples_;
  Split split_ = Split::Train;
  std::vector<std::int64_t> document_frequency_;
  std::vector<std::int64_t> token_frequency_;
  std::int64_t total_tokens_ = 0;
};

/// Raw "text" fields of a JSONL corpus, in file order.
std::vector<std::string> read_jsonl_texts(const std::filesystem::path& path);

}  // namespace mdlm
