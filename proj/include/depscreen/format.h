// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_FORMAT_H_
#define DEPSCREEN_FORMAT_H_

#include <string>
#include <string_view>
#include <vector>

namespace depscreen {

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

// Strict decimal parse of the whole cell; ParseError (with line) otherwise.
// Accepts nan/inf spellings so callers can report them precisely.
double parse_double(std::string_view cell, long line = 0);
long long parse_int(std::string_view cell, long line = 0);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

std::string read_file(const std::string& path);
// Writes via a temporary file and rename so readers never see partial files.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace depscreen

#endif  // DEPSCREEN_FORMAT_H_
