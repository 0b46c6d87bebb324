// Copyright 2026 The mdlm Authors
// SPDX-License-Identifier: Apache-2.0

// The library is compiled twice, 32-bit (training and sampling) and 64-bit
// (MDLM_DOUBLE, high-precision checks). Each flavor lives in its own inline
// namespace so both can be linked into one binary without symbol clashes;
// code written against `mdlm::` sees whichever flavor it was compiled for.

#pragma once

#ifdef MDLM_DOUBLE
#define MDLM_ABI f64
#else
#define MDLM_ABI f32
#endif
