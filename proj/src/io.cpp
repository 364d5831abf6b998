#include "zest/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "zest/errors.hpp"

namespace zest::io
{
    std::string format_number(double value)
    {
        std::array<char, 64> buf{};
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
        return std::string(buf.data(), res.ptr);
    }

    std::string csv_field(std::string_view text)
    {
        if (text.find_first_of(",\"\r\n") == std::string_view::npos)
            return std::string(text);
        std::string out = "\"";
        for (char c : text)
        {
            if (c == '"')
                out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    std::string csv_row(const std::vector<std::string> &fields)
    {
        std::string out;
        for (std::size_t i = 0; i < fields.size(); ++i)
        {
            if (i)
                out += ',';
            out += csv_field(fields[i]);
        }
        out += "\r\n";
        return out;
    }

    void write_file(const std::filesystem::path &path, std::string_view content)
    {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw IoError("cannot open " + tmp.string() + " for writing");
            out.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (!out)
                throw IoError("write failed for " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec)
            throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }

    std::string read_file(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError("cannot open " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
}
