// Copyright 2026 The BeamForge Authors
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

#include "beamforge/beam_model.hpp"
#include "beamforge/distill.hpp"
#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"
#include "beamforge/io.hpp"
#include "beamforge/pipeline.hpp"
#include "beamforge/profile.hpp"
#include "beamforge/range_image.hpp"
#include "beamforge/resampler.hpp"
#include "beamforge/simulator.hpp"
