#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace pmmtalk::io {

/// Reads a whole file; throws Error(IoFailure) when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` and renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

}  // namespace pmmtalk::io
