// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdlm/abi.hpp"

#include <stdexcept>
#include <string>

namespace mdlm::inline MDLM_ABI {

/// Error with a short machine-readable code ("empty_corpus", "parse", ...)
/// alongside the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace mdlm
