// Copyright 2026 The fbrl Authors
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
//
// Umbrella header: the whole library.

#ifndef FBRL_FBRL_HPP_
#define FBRL_FBRL_HPP_

#include "fbrl/array.hpp"
#include "fbrl/autodiff.hpp"
#include "fbrl/checkpoint.hpp"
#include "fbrl/common.hpp"
#include "fbrl/config.hpp"
#include "fbrl/dataset.hpp"
#include "fbrl/evaluation.hpp"
#include "fbrl/fb_core.hpp"
#include "fbrl/linalg.hpp"
#include "fbrl/mdp.hpp"
#include "fbrl/networks.hpp"
#include "fbrl/policy_opt.hpp"
#include "fbrl/rewards.hpp"
#include "fbrl/rng.hpp"
#include "fbrl/task_inference.hpp"

#endif  // FBRL_FBRL_HPP_
