// Copyright 2026 The degan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace degan {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input violates a shape or value contract.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A raster file could not be read or decoded.
class DecodeError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// No usable training pairs.
class DatasetError : public Error {
public:
  using Error::Error;
};

/// Checkpoint is truncated, corrupt, from another format version, or does not
/// match the requested architecture.
class IncompatibleCheckpoint : public Error {
public:
  using Error::Error;
};

/// A loss became NaN or infinite.
class TrainingDiverged : public Error {
public:
  using Error::Error;
};

}  // namespace degan
