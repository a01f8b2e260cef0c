// Copyright 2026 The NRM Authors. All Rights Reserved.
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

#ifndef NRM_TOOLS_CLI_H_
#define NRM_TOOLS_CLI_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace nrm::cli {

// Runs one subcommand. args excludes the program name. Results go to `out`,
// logs and errors to `err`. Returns the process exit status: 0 on success, 1
// on a runtime failure (including a failed grad-check), 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat `key = value` config file; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string& path);

}  // namespace nrm::cli

#endif  // NRM_TOOLS_CLI_H_
