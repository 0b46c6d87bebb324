// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mdlm/abi.hpp"

#include <Eigen/Dense>

namespace mdlm::inline MDLM_ABI {

// The library is compiled twice: 32-bit for training and sampling, 64-bit for
// gradient checks (MDLM_DOUBLE defined); see abi.hpp.
#ifdef MDLM_DOUBLE
using Real = double;
#else
using Real = float;
#endif

using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

inline constexpr const char* kRealName = sizeof(Real) == 8 ? "f64" : "f32";

}  // namespace mdlm
