#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hamp/matrix.hpp"

namespace hamp::io {

// Writes content to path atomically: the data goes to a sibling temp file
// which is renamed over the target, so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// CSV without header: one row per node, comma-separated doubles.
Matrix read_csv_matrix(const std::filesystem::path& path);
std::string csv_from_matrix(const MatView& m, int precision = 17);

// One integer per line.
std::vector<int> read_int_lines(const std::filesystem::path& path);
std::string int_lines(const std::vector<int>& xs);

void ensure_dir(const std::filesystem::path& dir);

} // namespace hamp::io
