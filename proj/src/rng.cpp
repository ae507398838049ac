// Copyright 2026 The segloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "segloc/rng.hpp"

#include <sstream>

#include "segloc/error.hpp"

namespace segloc {

std::string Rng::state() const {
  std::ostringstream ss;
  ss << engine_;
  return ss.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream ss(s);
  ss >> engine_;
  if (!ss) throw InvalidInput("malformed RNG state");
}

}  // namespace segloc
