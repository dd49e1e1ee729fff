#include "akan/textio.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <system_error>

#include "akan/errors.hpp"

namespace akan {

const char* to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::SchemaVersion: return "schema-version";
        case ParseErrorKind::Truncated: return "truncated";
        case ParseErrorKind::NonFinite: return "non-finite";
        case ParseErrorKind::Structural: return "structural";
        case ParseErrorKind::Syntax: return "syntax";
        case ParseErrorKind::MissingColumn: return "missing-column";
        case ParseErrorKind::NonNumeric: return "non-numeric";
        case ParseErrorKind::EmptyFile: return "empty-file";
    }
    return "unknown";
}

ParseError::ParseError(ParseErrorKind kind, const std::string& what, std::size_t line, std::size_t column)
    : Error(std::string(to_string(kind)) + ": " + what), kind_(kind), line_(line), column_(column) {}

}  // namespace akan

namespace akan::textio {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
    if (ec != std::errc{}) throw Error("format_double: buffer too small");
    return std::string(buf.data(), end);
}

std::optional<double> parse_double(std::string_view token) {
    if (token.empty()) return std::nullopt;
    // from_chars rejects a leading '+'
    if (token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec == std::errc::result_out_of_range) {
        // subnormal underflow or overflow: fall back to strtod semantics
        std::string copy(token);
        char* stop = nullptr;
        value = std::strtod(copy.c_str(), &stop);
        if (stop != copy.c_str() + copy.size()) return std::nullopt;
        return value;
    }
    if (ec != std::errc{} || end != token.data() + token.size()) return std::nullopt;
    return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string join_doubles(std::span<const double> values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(sep);
        out += format_double(values[i]);
    }
    return out;
}

TokenReader::TokenReader(std::istream& in, std::string source_name) : in_(in), source_(std::move(source_name)) {}

void TokenReader::fail(ParseErrorKind kind, const std::string& message) const {
    throw ParseError(kind, source_ + ":" + std::to_string(line_) + ": " + message, line_);
}

bool TokenReader::fill() {
    if (peeked_) return true;
    std::string raw;
    while (std::getline(in_, raw)) {
        ++line_;
        auto tokens = split_ws(raw);
        if (tokens.empty() || tokens.front().front() == '#') continue;
        peeked_.emplace();
        for (auto t : tokens) peeked_->emplace_back(t);
        return true;
    }
    return false;
}

bool TokenReader::at_end() { return !fill(); }

std::vector<std::string> TokenReader::next(std::string_view expecting) {
    if (!fill()) fail(ParseErrorKind::Truncated, "unexpected end of file, expected " + std::string(expecting));
    auto tokens = std::move(*peeked_);
    peeked_.reset();
    return tokens;
}

std::vector<std::string> TokenReader::expect(std::string_view keyword, std::size_t arity) {
    auto tokens = next(keyword);
    if (tokens.front() != keyword) {
        fail(ParseErrorKind::Structural,
             "expected '" + std::string(keyword) + "', found '" + tokens.front() + "'");
    }
    if (tokens.size() != arity + 1) {
        fail(ParseErrorKind::Structural, "'" + std::string(keyword) + "' takes " +
                                                                 std::to_string(arity) + " values, found " +
                                                                 std::to_string(tokens.size() - 1));
    }
    return tokens;
}

double TokenReader::number(const std::string& token, std::string_view what) const {
    auto v = parse_double(token);
    if (!v) fail(ParseErrorKind::Syntax, "bad number '" + token + "' for " + std::string(what));
    return *v;
}

double TokenReader::finite_number(const std::string& token, std::string_view what) const {
    double v = number(token, what);
    if (!std::isfinite(v)) fail(ParseErrorKind::NonFinite, "non-finite value '" + token + "' in " + std::string(what));
    return v;
}

std::size_t TokenReader::count(const std::string& token, std::string_view what) const {
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || end != token.data() + token.size()) {
        fail(ParseErrorKind::Syntax, "bad count '" + token + "' for " + std::string(what));
    }
    return v;
}

std::vector<double> TokenReader::numbers(std::size_t n, std::string_view what) {
    std::vector<double> out;
    out.reserve(n);
    while (out.size() < n) {
        auto tokens = next(what);
        if (out.size() + tokens.size() > n) {
            fail(ParseErrorKind::Structural, std::string(what) + ": too many values on line");
        }
        for (const auto& t : tokens) {
            auto v = parse_double(t);
            if (!v) fail(ParseErrorKind::Truncated,
                         std::string(what) + ": expected " + std::to_string(n) + " values, got " + std::to_string(out.size()) +
                             " before '" + t + "'");
            if (!std::isfinite(*v)) fail(ParseErrorKind::NonFinite, "non-finite value '" + t + "' in " + std::string(what));
            out.push_back(*v);
        }
    }
    return out;
}

}  // namespace akan::textio
