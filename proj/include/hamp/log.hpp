#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace hamp::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Level comes from HAMP_LOG in {error, info, debug}; default info.
inline Level level() {
    static Level lvl = [] {
        const char* env = std::getenv("HAMP_LOG");
        if (!env) return Level::info;
        std::string s(env);
        if (s == "error") return Level::error;
        if (s == "debug") return Level::debug;
        return Level::info;
    }();
    return lvl;
}

inline std::mutex& mtx() {
    static std::mutex m;
    return m;
}

inline void write(Level lvl, const char* tag, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(level())) return;
    std::lock_guard<std::mutex> lock(mtx());
    std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void error(const std::string& msg) { write(Level::error, "error", msg); }
inline void info(const std::string& msg) { write(Level::info, "info", msg); }
inline void debug(const std::string& msg) { write(Level::debug, "debug", msg); }

} // namespace hamp::log
