// Copyright 2026 The rotquant Authors.
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

#include "rotquant/adaptive.hpp"
#include "rotquant/bsq.hpp"
#include "rotquant/codec.hpp"
#include "rotquant/core.hpp"
#include "rotquant/drive.hpp"
#include "rotquant/error.hpp"
#include "rotquant/generators.hpp"
#include "rotquant/harness.hpp"
#include "rotquant/metrics.hpp"
#include "rotquant/parallel.hpp"
#include "rotquant/random.hpp"
#include "rotquant/report.hpp"
#include "rotquant/vq.hpp"
