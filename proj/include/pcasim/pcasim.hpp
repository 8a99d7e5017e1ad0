/*
 * Copyright 2026 The pcasim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "error.hpp"
#include "numerics.hpp"
#include "matrix.hpp"
#include "systolic.hpp"
#include "memory.hpp"
#include "thread_pool.hpp"
#include "scheduler.hpp"
#include "jacobi.hpp"
#include "perf.hpp"
#include "pca.hpp"
#include "csv.hpp"
#include "oracle.hpp"
#include "synthetic.hpp"
