// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace tgcn::cli {

/// Entry point for the `tgcn` tool. Returns 0 on success, 1 when a library
/// error occurs (reported as a JSON object on `err`) and 2 for usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tgcn::cli
