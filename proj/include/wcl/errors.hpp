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

#ifndef WCL_ERRORS_HPP_
#define WCL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace wcl {

// Bad caller input: out-of-range pixels, invalid depths, malformed files,
// mismatched shapes.
class InputDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that cannot be carried out in floating point as requested,
// e.g. kernel underflow in the naive Sinkhorn iteration.
class NumericalDegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The instance exceeds what an exhaustive routine is willing to enumerate.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Descent diverged or produced a non-finite objective.
class OptimizationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wcl

#endif  // WCL_ERRORS_HPP_
