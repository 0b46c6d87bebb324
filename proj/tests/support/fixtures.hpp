// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// Small builders shared by the test suites: data paths, scratch directories
// and in-memory corpora.

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mdlm/corpus.hpp"
#include "mdlm/random.hpp"

namespace mdlm::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(MDLM_TEST_DATA_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mdlm_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// Vocabulary and corpus over raw sentences, without attributes.
struct TextCorpus {
  Vocabulary vocab;
  Corpus corpus;
};

inline TextCorpus make_corpus(const std::vector<std::string>& texts, int min_count = 1) {
  TextCorpus out{Vocabulary::build(texts, min_count), {}};
  std::vector<Example> examples;
  for (const auto& t : texts) examples.push_back(Example{tokenize(t, out.vocab), {}});
  out.corpus = Corpus(std::move(examples), Split::Train, out.vocab.size());
  return out;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  return normal_matrix(rows, cols, rng, stddev);
}

}  // namespace mdlm::testing
