// Copyright 2026 The EANet Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "eanet/pipeline.hpp"

int main(int argc, char** argv) {
  eanet::tune_allocator();
  doctest::Context context(argc, argv);
  return context.run();
}
