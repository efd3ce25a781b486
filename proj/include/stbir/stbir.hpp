// Copyright 2026 The STBIR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "stbir/binary_io.hpp"
#include "stbir/ckfso.hpp"
#include "stbir/cldre.hpp"
#include "stbir/commands.hpp"
#include "stbir/config.hpp"
#include "stbir/datamodel.hpp"
#include "stbir/encoders.hpp"
#include "stbir/error.hpp"
#include "stbir/evaluation.hpp"
#include "stbir/losses.hpp"
#include "stbir/matrix.hpp"
#include "stbir/mcfa.hpp"
#include "stbir/model.hpp"
#include "stbir/random.hpp"
#include "stbir/report.hpp"
#include "stbir/retrieval.hpp"
