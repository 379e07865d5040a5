#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace hsde {

/// Round-trippable, locale-independent formatting of a double.
std::string format_double(double v);

/// Minimal CSV builder. Fields are written verbatim; callers only emit
/// numbers and simple identifiers.
class CsvWriter {
public:
    explicit CsvWriter(std::initializer_list<std::string_view> header);

    CsvWriter& field(std::string_view s);
    CsvWriter& field(double v);
    CsvWriter& field(long long v);
    CsvWriter& field(std::size_t v) { return field(static_cast<long long>(v)); }
    CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
    void end_row();

    const std::string& str() const noexcept { return out_; }

private:
    void sep();
    std::string out_;
    bool row_started_ = false;
};

/// Writes `content` to `path` via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace hsde
