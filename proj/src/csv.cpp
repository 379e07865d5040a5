#include "hybridsde/csv.hpp"

#include <charconv>
#include <fstream>
#include <system_error>

#include "hybridsde/errors.hpp"

namespace hsde {

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) return "nan";
    return {buf, end};
}

CsvWriter::CsvWriter(std::initializer_list<std::string_view> header) {
    for (auto h : header) field(h);
    end_row();
}

void CsvWriter::sep() {
    if (row_started_) out_.push_back(',');
    row_started_ = true;
}

CsvWriter& CsvWriter::field(std::string_view s) {
    sep();
    out_.append(s);
    return *this;
}

CsvWriter& CsvWriter::field(double v) {
    sep();
    out_.append(format_double(v));
    return *this;
}

CsvWriter& CsvWriter::field(long long v) {
    sep();
    out_.append(std::to_string(v));
    return *this;
}

void CsvWriter::end_row() {
    out_.push_back('\n');
    row_started_ = false;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParseError(tmp.string() + ": cannot open for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ParseError(tmp.string() + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ParseError(path.string() + ": rename failed: " + ec.message());
}

}  // namespace hsde
