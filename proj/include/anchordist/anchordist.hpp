// Copyright 2026 The anchordist Authors
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

/// Anchor-distance multi-object distance estimation: umbrella header.

#include <anchordist/anchors.hpp>
#include <anchordist/data.hpp>
#include <anchordist/geometry.hpp>
#include <anchordist/head.hpp>
#include <anchordist/losses.hpp>
#include <anchordist/metrics.hpp>
#include <anchordist/plot.hpp>
#include <anchordist/train.hpp>
#include <anchordist/types.hpp>
