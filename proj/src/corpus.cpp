// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdlm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "mdlm/error.hpp"
#include "mdlm/hash.hpp"

namespace mdlm::inline MDLM_ABI {

namespace {

const char* const kSpecials[] = {"<pad>", "<mask>", "<unk>"};

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }
bool is_ascii_space(unsigned char c) { return c < 128 && std::isspace(c); }

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return is_ascii_space(c); })) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("parse", path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
    }
    if (!row.is_object() || !row.contains("text") || !row["text"].is_string())
      throw Error("parse", path.string() + ":" + std::to_string(line_no) + ": missing string field \"text\"");
    if (row.contains("attributes") && !row["attributes"].is_object())
      throw Error("parse", path.string() + ":" + std::to_string(line_no) + ": \"attributes\" must be an object");
    fn(row, line_no);
  }
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const char* s : kSpecials) add(s);
}

void Vocabulary::add(const std::string& token) {
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& raw_sentences, int min_count) {
  if (raw_sentences.empty()) throw Error("empty_corpus", "empty corpus");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& s : raw_sentences)
    for (auto& w : split_words(s)) ++counts[w];

  std::vector<std::pair<std::string, std::int64_t>> ordered(counts.begin(), counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary vocab;
  for (const auto& [token, count] : ordered) {
    if (count >= min_count && !vocab.contains(token)) vocab.add(token);
  }
  return vocab;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("parse", "vocabulary must be a JSON object");
  std::vector<std::string> tokens(j.size());
  for (const auto& [token, id] : j.items()) {
    const int i = id.get<int>();
    if (i < 0 || i >= static_cast<int>(tokens.size()) || !tokens[i].empty())
      throw Error("parse", "vocabulary ids must be a permutation of 0..V-1");
    tokens[i] = token;
  }
  for (int i = 0; i < 3; ++i)
    if (static_cast<int>(tokens.size()) <= i || tokens[i] != kSpecials[i])
      throw Error("parse", "vocabulary is missing special token " + std::string(kSpecials[i]));
  Vocabulary vocab;
  for (std::size_t i = 3; i < tokens.size(); ++i) vocab.add(tokens[i]);
  return vocab;
}

nlohmann::json Vocabulary::to_json() const {
  // ordered_json keeps ids ascending in the file.
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) j[id_to_token_[i]] = i;
  return nlohmann::json::parse(j.dump());
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw Error("range", "token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  Fnv1a h;
  for (const auto& t : id_to_token_) {
    h.update(t);
    h.update(std::string_view("\n"));
  }
  return h.digest();
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (unsigned char c : text) {
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      words.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(c < 128 ? std::tolower(c) : c));
    }
  }
  flush();
  return words;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, int max_length) {
  TokenSequence seq;
  seq.source = std::string(text);
  for (const auto& w : split_words(text)) {
    if (static_cast<int>(seq.ids.size()) >= max_length) break;
    seq.ids.push_back(vocab.id(w));
  }
  if (seq.ids.empty()) throw Error("empty_sentence", "empty sentence");
  return seq;
}

std::string detokenize(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == kPadId) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) { return detokenize(seq.ids, vocab); }

Corpus::Corpus(std::vector<Example> examples, Split split, int vocab_size)
    : examples_(std::move(examples)),
      split_(split),
      document_frequency_(static_cast<std::size_t>(vocab_size), 0),
      token_frequency_(static_cast<std::size_t>(vocab_size), 0) {
  for (const auto& ex : examples_) {
    std::set<int> seen;
    for (int id : ex.tokens.ids) {
      if (id < 0 || id >= vocab_size) throw Error("range", "token id outside vocabulary");
      ++token_frequency_[static_cast<std::size_t>(id)];
      ++total_tokens_;
      seen.insert(id);
    }
    for (int id : seen) ++document_frequency_[static_cast<std::size_t>(id)];
  }
}

Corpus Corpus::load(const std::filesystem::path& path, const Vocabulary& vocab, Split split, int max_length) {
  std::vector<Example> examples;
  for_each_jsonl(path, [&](const nlohmann::json& row, int line_no) {
    Example ex;
    try {
      ex.tokens = tokenize(row["text"].get<std::string>(), vocab, max_length);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (row.contains("attributes")) {
      for (const auto& [field, value] : row["attributes"].items()) {
        if (!value.is_string())
          throw Error("parse", path.string() + ":" + std::to_string(line_no) + ": attribute values must be strings");
        ex.attributes[field] = value.get<std::string>();
      }
    }
    examples.push_back(std::move(ex));
  });
  return Corpus(std::move(examples), split, vocab.size());
}

std::int64_t Corpus::document_frequency(int id) const {
  return id >= 0 && id < vocab_size() ? document_frequency_[static_cast<std::size_t>(id)] : 0;
}

std::int64_t Corpus::token_frequency(int id) const {
  return id >= 0 && id < vocab_size() ? token_frequency_[static_cast<std::size_t>(id)] : 0;
}

std::vector<std::string> read_jsonl_texts(const std::filesystem::path& path) {
  std::vector<std::string> texts;
  for_each_jsonl(path, [&](const nlohmann::json& row, int) { texts.push_back(row["text"].get<std::string>()); });
  return texts;
}

}  // namespace mdlm
