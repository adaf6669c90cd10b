// Copyright (c) 2026 xmodal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace xmodal {

// Entry point behind the xmodal binary. Exit codes: 0 success, 1 usage or
// configuration error, 2 data error, 3 numeric error (NaN/Inf).
int run_cli(const std::vector<std::string>& args);

}  // namespace xmodal
