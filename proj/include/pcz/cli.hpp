// SPDX-FileCopyrightText: 2026 pcz contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace pcz {

// Entry point shared by the pcz binary and the CLI tests.
// Exit codes: 0 ok, 1 validation, 2 I/O, 3 internal.
int cli_main(const std::vector<std::string>& args);

}  // namespace pcz
