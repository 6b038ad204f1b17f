// Copyright (C) 2026 The esddpm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace esddpm {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

/// A schedule quantity that must be strictly positive underflowed.
class DegenerateSchedule : public Error {
public:
    using Error::Error;
};

/// A denoising step outside the horizon the model was trained on.
class UntrainedStep : public Error {
public:
    using Error::Error;
};

/// Non-finite values showed up in a loss, gradient or parameter.
class NumericalError : public Error {
public:
    using Error::Error;
};

class CorruptCheckpoint : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

#define ESDDPM_CHECK(cond, ErrType, msg)                                                          \
    do {                                                                                          \
        if (!(cond)) {                                                                            \
            throw ErrType(std::string(msg));                                                      \
        }                                                                                         \
    } while (0)

}  // namespace esddpm
