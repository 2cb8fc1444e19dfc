#include "odl/log.hpp"

#include <iostream>
#include <mutex>

namespace odl {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

LogSink& current_sink() {
    static LogSink sink = [](LogLevel level, std::string_view message) {
        if (level == LogLevel::Warning) {
            std::cerr << "warning: " << message << '\n';
        }
    };
    return sink;
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
    std::lock_guard lock(sink_mutex());
    LogSink previous = std::move(current_sink());
    current_sink() = std::move(sink);
    return previous;
}

void log_message(LogLevel level, std::string_view message) {
    std::lock_guard lock(sink_mutex());
    if (current_sink()) {
        current_sink()(level, message);
    }
}

}  // namespace odl
