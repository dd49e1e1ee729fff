#pragma once
// Decimal formatting and a line/token reader used by the checkpoint formats.

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "akan/errors.hpp"

namespace akan::textio {

/// 17 significant digits; parse_double(format_double(x)) == x bit-exactly for finite x.
std::string format_double(double value);

/// Strict full-token parse. Accepts nan/inf spellings; rejects trailing garbage.
std::optional<double> parse_double(std::string_view token);

std::vector<std::string_view> split_ws(std::string_view line);

std::string join_doubles(std::span<const double> values, char sep = ' ');

/// Reads non-empty, non-comment ('#') lines and splits them into whitespace tokens.
/// Every error it raises is a ParseError carrying the current line number.
class TokenReader {
public:
    TokenReader(std::istream& in, std::string source_name);

    /// Next meaningful line as tokens; throws Truncated at end of input.
    std::vector<std::string> next(std::string_view expecting);
    bool at_end();

    /// Next line, requiring first token == keyword and exactly `arity` further tokens.
    std::vector<std::string> expect(std::string_view keyword, std::size_t arity);

    double number(const std::string& token, std::string_view what) const;
    double finite_number(const std::string& token, std::string_view what) const;
    std::size_t count(const std::string& token, std::string_view what) const;

    /// Reads `n` finite numbers spread over one or more lines.
    std::vector<double> numbers(std::size_t n, std::string_view what);

    std::size_t line() const noexcept { return line_; }
    const std::string& source() const noexcept { return source_; }

    [[noreturn]] void fail(ParseErrorKind kind, const std::string& message) const;

private:
    bool fill();

    std::istream& in_;
    std::string source_;
    std::size_t line_ = 0;
    std::optional<std::vector<std::string>> peeked_;
};

}  // namespace akan::textio
