// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>
