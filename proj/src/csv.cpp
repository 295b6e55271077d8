#include "insomnet/csv.hpp"

#include "insomnet/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace insomnet::csv {

std::string format(double value)
{
    if (std::isnan(value))
        return "nan";
    char buf[32];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        if (std::strtod(buf, nullptr) == value)
            break;
    }
    return buf;
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(ErrorCode::ParseError, "bad number '" + std::string(text) + "'");
    return value;
}

long long parse_int(std::string_view text)
{
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(ErrorCode::ParseError, "bad integer '" + std::string(text) + "'");
    return value;
}

std::vector<std::string> split(std::string_view line, char sep)
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        auto at = line.find(sep, start);
        auto field = line.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start);
        while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
            field.remove_suffix(1);
        while (!field.empty() && field.front() == ' ')
            field.remove_prefix(1);
        fields.emplace_back(field);
        if (at == std::string_view::npos)
            break;
        start = at + 1;
    }
    return fields;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        rows.push_back(split(line));
    }
    return rows;
}

Writer::Writer(const std::filesystem::path& path, const std::string& comment) : path_(path)
{
    file_ = std::fopen(path.string().c_str(), "wb");
    if (!file_)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    if (!comment.empty())
        std::fprintf(file_, "# %s\n", comment.c_str());
}

Writer::~Writer()
{
    if (file_)
        std::fclose(file_);
}

void Writer::row(const std::vector<std::string>& fields)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            std::fputc(',', file_);
        std::fputs(fields[i].c_str(), file_);
    }
    std::fputc('\n', file_);
}

} // namespace insomnet::csv
