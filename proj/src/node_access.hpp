// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "eanet/tensor.hpp"

namespace eanet {

// Gradient buffer of parent `i`, or nullptr when that input is a constant.
inline double* grad_ptr(detail::Node& self, std::size_t i) {
  auto& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  return p.ensure_grad().data();
}

}  // namespace eanet
