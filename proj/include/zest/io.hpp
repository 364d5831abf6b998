#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace zest::io
{
    /// Shortest decimal text that round-trips to the same double.
    std::string format_number(double value);

    /// RFC 4180 field: quoted when it contains a comma, quote, CR or LF.
    std::string csv_field(std::string_view text);

    std::string csv_row(const std::vector<std::string> &fields);

    /// Writes through a temporary file and renames, so readers never see a partial file.
    void write_file(const std::filesystem::path &path, std::string_view content);

    std::string read_file(const std::filesystem::path &path);
}
