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

#include <cstddef>
#include <string>

namespace rotquant {

/// How a row's statistic is compared with its bound.
enum class Check {
  at_most,   ///< pass iff statistic <= bound + slack
  at_least,  ///< pass iff statistic >= bound - slack
  exceeds,   ///< negative control: pass iff statistic > bound + slack
};

inline const char* to_string(Check c) {
  switch (c) {
    case Check::at_most: return "at_most";
    case Check::at_least: return "at_least";
    case Check::exceeds: return "exceeds";
  }
  return "?";
}

/// One verified claim: measured statistic, theoretical bound, sampling slack.
struct VerifyReport {
  std::string experiment;
  std::string citation;  ///< which bound the row checks, in words
  std::size_t d = 0;
  std::string statistic_name;
  double statistic = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  std::string slack_rule;  ///< how `slack` was derived (DKW, 4 sigma, ...)
  Check check = Check::at_most;
  bool pass = false;
  std::size_t trials = 0;
  double std_err = 0.0;
  std::string note;

  VerifyReport& finalize() {
    switch (check) {
      case Check::at_most: pass = statistic <= bound + slack; break;
      case Check::at_least: pass = statistic >= bound - slack; break;
      case Check::exceeds: pass = statistic > bound + slack; break;
    }
    return *this;
  }
};

}  // namespace rotquant
