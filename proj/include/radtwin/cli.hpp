// radtwin - geometry-conditioned radio propagation prediction for dynamic indoor scenes
// Copyright (C) 2026 radtwin contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

namespace radtwin::cli {

/// Entry point for the radtwin binary. Exit codes: 0 success, 2 config or
/// usage error, 3 missing artifact, 4 numeric failure.
int run(int argc, const char *const *argv);

} // namespace radtwin::cli
