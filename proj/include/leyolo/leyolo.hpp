//
//   Copyright 2026 The leyolo-cpp Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
#pragma once

#include "leyolo/analyzer.hpp"
#include "leyolo/archspec.hpp"
#include "leyolo/archspec_json.hpp"
#include "leyolo/blocks.hpp"
#include "leyolo/engine.hpp"
#include "leyolo/error.hpp"
#include "leyolo/image.hpp"
#include "leyolo/init.hpp"
#include "leyolo/kernels.hpp"
#include "leyolo/parallel.hpp"
#include "leyolo/params.hpp"
#include "leyolo/postprocess.hpp"
#include "leyolo/tensor.hpp"
#include "leyolo/weight_store.hpp"
