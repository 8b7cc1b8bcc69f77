/*
 * Copyright 2026 The geofeat Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEOFEAT_ERROR_HPP_
#define GEOFEAT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace geofeat {

// Error categories map one-to-one onto the C API status codes.
enum class ErrorKind {
  kUsage = 1,     // bad arguments or configuration
  kData = 2,      // malformed or invalid input data
  kIo = 3,        // filesystem failures
  kNumeric = 4,   // non-finite values, divergence
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) {
  throw Error(ErrorKind::kUsage, msg);
}
[[noreturn]] inline void throw_data(const std::string& msg) {
  throw Error(ErrorKind::kData, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorKind::kIo, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorKind::kNumeric, msg);
}

}  // namespace geofeat

#endif  // GEOFEAT_ERROR_HPP_
