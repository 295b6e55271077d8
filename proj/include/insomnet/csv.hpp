#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace insomnet::csv {

/// Shortest text that parses back to the same double.
std::string format(double value);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view line, char sep = ',');

/// Non-comment, non-empty lines split into fields. Lines starting with '#'
/// are skipped.
std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path);

/// Opens for writing or throws IoError; the caller streams rows in.
class Writer {
public:
    Writer(const std::filesystem::path& path, const std::string& comment);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void row(const std::vector<std::string>& fields);

private:
    std::FILE* file_ = nullptr;
    std::filesystem::path path_;
};

} // namespace insomnet::csv
