// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The GLIMPSE Engine Authors

#include <string>
#include <vector>

#include "glimpse/cli.hpp"

int main(int argc, char** argv) {
  return glimpse::cli::run(std::vector<std::string>(argv, argv + argc));
}
