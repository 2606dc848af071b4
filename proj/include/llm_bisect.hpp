// Copyright 2026 The llm-bisect Authors.
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


#pragma once

// Umbrella header. The HTTP pieces (http_backend.hpp, service.hpp) are kept
// out so that users who only need the engine do not pull in httplib.

#include "llm_bisect/annotate.hpp"
#include "llm_bisect/bisect.hpp"
#include "llm_bisect/categories.hpp"
#include "llm_bisect/config.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/eval.hpp"
#include "llm_bisect/label.hpp"
#include "llm_bisect/oracle.hpp"
#include "llm_bisect/pipeline.hpp"
#include "llm_bisect/process.hpp"
#include "llm_bisect/prompt.hpp"
#include "llm_bisect/repo.hpp"
#include "llm_bisect/response.hpp"
#include "llm_bisect/sample.hpp"
#include "llm_bisect/session_store.hpp"
#include "llm_bisect/simulate.hpp"
#include "llm_bisect/util.hpp"
