#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace edittrace {

using Json = nlohmann::ordered_json;

// One JSON value per non-blank line. Errors name the path and line number.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<Json>& rows);

/// Writes to "<path>.tmp" and renames over `path`, so readers never observe
/// a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

inline void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<Json>& rows) {
  write_file_atomic(path, to_jsonl(rows));
}

std::string read_text(const std::filesystem::path& path);

}  // namespace edittrace
