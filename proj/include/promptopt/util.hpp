#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace promptopt {

/// Base class for all library errors. `code()` is a stable machine-readable
/// tag ("ScoreOutOfRange", "ChecksumMismatch", ...); what() carries details.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct IoError : Error {
    IoError(const std::string& message) : Error("IoError", message) {}
};

struct FileNotFound : Error {
    explicit FileNotFound(const std::filesystem::path& p)
        : Error("FileNotFound", p.string()) {}
};

// 64-bit FNV-1a. Used for content checksums and the mock provider's digests;
// not a cryptographic hash.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset);
std::string to_hex16(std::uint64_t v);

std::string trim_copy(std::string_view s);
bool is_blank(std::string_view s);
std::string ascii_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

/// Shortest decimal rendering that round-trips ("4", "0.5", "2.75").
std::string format_double(double v);

/// Fixed-precision rendering for report tables ("0.6486").
std::string format_fixed(double v, int decimals);

std::string iso8601_utc(std::int64_t unix_seconds);
std::int64_t parse_iso8601_utc(const std::string& text);  // throws IoError on malformed input
std::int64_t now_unix_seconds();

std::string read_file(const std::filesystem::path& path);
/// Writes via a temp file in the same directory followed by rename, so
/// readers never observe a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace promptopt
