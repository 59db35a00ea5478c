/*
 * Copyright 2026 The WCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef WCL_HPP_
#define WCL_HPP_

#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"
#include "wcl/sinkhorn.hpp"
#include "wcl/exact_ot.hpp"
#include "wcl/consistency_loss.hpp"
#include "wcl/evalmetrics.hpp"
#include "wcl/toyopt.hpp"
#include "wcl/grad_check.hpp"
#include "wcl/io.hpp"

#endif  // WCL_HPP_
