// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace nm {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from NM_LOG={error,info,debug}; default info.
inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("NM_LOG");
        if (!env) return LogLevel::info;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

inline void vlog(LogLevel lvl, const char* tag, const char* fmt, va_list args) {
    if (lvl > log_level()) return;
    std::fprintf(stderr, "[nm %s] ", tag);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

inline void log_error(const char* fmt, ...) {
    va_list args; va_start(args, fmt);
    vlog(LogLevel::error, "error", fmt, args);
    va_end(args);
}

inline void log_info(const char* fmt, ...) {
    va_list args; va_start(args, fmt);
    vlog(LogLevel::info, "info", fmt, args);
    va_end(args);
}

inline void log_debug(const char* fmt, ...) {
    va_list args; va_start(args, fmt);
    vlog(LogLevel::debug, "debug", fmt, args);
    va_end(args);
}

}  // namespace nm
