// Copyright 2026 The hvic-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end: `hvic <subcommand> [options]`.

#pragma once

#include <ostream>

namespace hvic {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. Returns 0 on success, 1 on usage or configuration
/// errors, 2 on runtime failures (I/O, corrupt files, divergence).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hvic
