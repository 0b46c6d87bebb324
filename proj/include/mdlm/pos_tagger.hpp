// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdlm/abi.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mdlm/corpus.hpp"

namespace mdlm::inline MDLM_ABI {

/// Lexicon lookup tagger: each word gets its most frequent tag from a small
/// hand-tagged seed lexicon; unknown words are NOUN.
class PosTagger {
 public:
  PosTagger() = default;
  explicit PosTagger(std::map<std::string, std::string> lexicon);

  /// Tab-separated "word<TAB>TAG" lines; '#' starts a comment line.
  static PosTagger load(const std::filesystem::path& path);

  const std::string& tag(const std::string& word) const;
  std::vector<std::string> tag_sequence(const TokenSequence& seq, const Vocabulary& vocab) const;
  /// Sorted distinct tags, always including the NOUN fallback.
  std::vector<std::string> tagset() const;
  std::size_t size() const { return lexicon_.size(); }

 private:
  std::map<std::string, std::string> lexicon_;
};

std::vector<std::string> split_tags(const std::string& text);

}  // namespace mdlm
