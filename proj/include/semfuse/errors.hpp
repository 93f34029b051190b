// Copyright 2026 The semfuse Authors
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

#ifndef SEMFUSE__ERRORS_HPP_
#define SEMFUSE__ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semfuse
{

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Binary / text decoding.

class TruncatedFile : public Error
{
public:
  TruncatedFile(std::size_t length, std::size_t record_size)
  : Error(
      "truncated file: " + std::to_string(length) + " bytes is not a multiple of " +
      std::to_string(record_size) + " (trailing record starts at byte " +
      std::to_string(length - length % record_size) + ")"),
    offset_(length - length % record_size)
  {
  }
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

class NonFiniteValue : public Error
{
public:
  NonFiniteValue(std::size_t record, std::size_t field)
  : Error(
      "non-finite value at record " + std::to_string(record) + ", field " +
      std::to_string(field)),
    record_(record)
  {
  }
  std::size_t record() const { return record_; }

private:
  std::size_t record_;
};

class MalformedLine : public Error
{
public:
  MalformedLine(std::size_t line, const std::string & what)
  : Error("line " + std::to_string(line) + ": " + what), line_(line)
  {
  }
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class MissingKey : public Error
{
public:
  explicit MissingKey(const std::string & key) : Error("missing key: " + key) {}
};

class MalformedMatrix : public Error
{
public:
  using Error::Error;
};

class MissingScore : public Error
{
public:
  using Error::Error;
};

class MissingCalibration : public Error
{
public:
  using Error::Error;
};

// Fusion.

class LengthMismatch : public Error
{
public:
  LengthMismatch(std::size_t expected, std::size_t actual)
  : Error(
      "length mismatch: " + std::to_string(expected) + " points vs " + std::to_string(actual) +
      " entries")
  {
  }
};

class NonFiniteScore : public Error
{
public:
  explicit NonFiniteScore(std::size_t point)
  : Error("non-finite class score at point " + std::to_string(point))
  {
  }
};

// Encoders.

class InvalidConfig : public Error
{
public:
  using Error::Error;
};

class CoordOutOfRange : public Error
{
public:
  using Error::Error;
};

class Overflow : public Error
{
public:
  using Error::Error;
};

class DegenerateAnchor : public Error
{
public:
  using Error::Error;
};

// Losses.

class DomainError : public Error
{
public:
  using Error::Error;
};

// Evaluation.

class NoGroundTruth : public Error
{
public:
  NoGroundTruth() : Error("no ground truth in bucket") {}
};

class FrameMismatch : public Error
{
public:
  using Error::Error;
};

}  // namespace semfuse

#endif  // SEMFUSE__ERRORS_HPP_
