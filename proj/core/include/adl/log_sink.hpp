#pragma once

// Formatting-free logging entry points. Kept apart from log.hpp so the sink
// can be compiled without the tensor library's headers.

#include <filesystem>
#include <string>
#include <string_view>

namespace adl::logging {

enum class Level { debug, info, warn, error, off };

/// "debug", "info", "warn", "error" or "off"; throws std::invalid_argument otherwise.
Level parse_level(std::string_view name);
void set_level(Level level);
bool enabled(Level level);
/// Mirrors all messages into `path` in addition to stderr.
void add_file_sink(const std::filesystem::path& path);
void write(Level level, std::string_view message);

}  // namespace adl::logging
