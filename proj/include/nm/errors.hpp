// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nm {

// Malformed or inconsistent external data (files, manifests, headers).
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values detected mid-computation; the offending stage aborts.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resource limit exceeded (e.g. grid extraction past the memory cap).
struct resource_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nm
