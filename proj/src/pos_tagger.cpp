// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/pos_tagger.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mdlm/error.hpp"

namespace mdlm::inline MDLM_ABI {

namespace {
const std::string kFallbackTag = "NOUN";
}

PosTagger::PosTagger(std::map<std::string, std::string> lexicon) : lexicon_(std::move(lexicon)) {}

PosTagger PosTagger::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::map<std::string, std::string> lexicon;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw Error("parse", path.string() + ":" + std::to_string(line_no) + ": expected word<TAB>TAG");
    lexicon[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return PosTagger(std::move(lexicon));
}

const std::string& PosTagger::tag(const std::string& word) const {
  auto it = lexicon_.find(word);
  return it == lexicon_.end() ? kFallbackTag : it->second;
}

std::vector<std::string> PosTagger::tag_sequence(const TokenSequence& seq, const Vocabulary& vocab) const {
  std::vector<std::string> tags;
  tags.reserve(seq.size());
  for (int id : seq.ids) tags.push_back(tag(vocab.token(id)));
  return tags;
}

std::vector<std::string> PosTagger::tagset() const {
  std::set<std::string> tags{kFallbackTag};
  for (const auto& [word, tag] : lexicon_) tags.insert(tag);
  return {tags.begin(), tags.end()};
}

std::vector<std::string> split_tags(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> tags;
  for (std::string t; in >> t;) tags.push_back(t);
  return tags;
}

}  // namespace mdlm
