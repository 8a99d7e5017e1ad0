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

#include <stdexcept>
#include <string>

namespace pcasim {

/// Malformed or out-of-contract input (bad CSV, bad config, dimension mismatch).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical failure detected at run time (saturation storm, NaN, asymmetry).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A violated precondition inside the simulator (programming error).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw ContractViolation(what);
}

inline void require_input(bool cond, const std::string& what)
{
    if (!cond) throw InputError(what);
}

} // namespace detail
} // namespace pcasim
