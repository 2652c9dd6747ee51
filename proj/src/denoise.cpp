#include <regex>
#include <string>
#include <vector>

#include "geobench/sandbox.hpp"

namespace geobench {

namespace {

struct Rule {
    ErrorCategory category;
    std::regex pattern;
};

const std::vector<Rule>& rules() {
    constexpr auto flags = std::regex::icase | std::regex::ECMAScript;
    static const std::vector<Rule> table{
        {ErrorCategory::timeout, std::regex(R"(timed[ -]?out|\btimeout\b|deadline exceeded)", flags)},
        {ErrorCategory::crs_mismatch,
         std::regex(R"(crs mismatch|epsg:\d+\s*(vs\.?|!=|and)\s*epsg:\d+|coordinate reference system|)"
                    R"(different crs|crs\b.*\b(do|does|did) not match|unknown crs|invalid crs|crserror|)"
                    R"(unknown epsg)",
                    flags)},
        {ErrorCategory::topology_error,
         std::regex(R"(topolog|self[- ]?intersect|invalid geometr|ring self|not a valid polygon)", flags)},
        {ErrorCategory::file_locked,
         std::regex(R"(\block(ed)?\b|resource busy|being used by another process|permission denied)", flags)},
        {ErrorCategory::missing_file,
         std::regex(R"(no such file|file not found|filenotfounderror|does not exist|cannot open)", flags)},
        {ErrorCategory::bad_parameter,
         std::regex(R"(invalid (value|parameter|argument)|valueerror|typeerror|keyerror|)"
                    R"(unexpected keyword|missing required|unknown parameter|expects|could not convert|)"
                    R"(must be)",
                    flags)},
    };
    return table;
}

const std::regex& frame_line() {
    static const std::regex re(
        R"(^(Traceback \(most recent call last\):?|File ".*", line \d+.*|at [\w$.<>]+\(.*\)|#\d+\s.*|\^+|~+|)"
        R"(During handling of the above exception.*|The above exception was the direct cause.*|\.\.\.)$)");
    return re;
}

const std::regex& exception_prefix() {
    static const std::regex re(R"(^(?:[A-Za-z_][\w]*\.)+([A-Za-z_]\w*(?:Error|Exception|Warning)):)");
    return re;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(std::string_view raw) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto end = raw.find('\n', pos);
        if (end == std::string_view::npos) end = raw.size();
        auto line = trim(raw.substr(pos, end - pos));
        if (!line.empty()) lines.push_back(std::move(line));
        pos = end + 1;
    }
    return lines;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            space = !out.empty();
        } else {
            if (space) out.push_back(' ');
            space = false;
            out.push_back(c);
        }
    }
    return out;
}

// Cuts at a UTF-8 code point boundary so the result stays valid text.
std::string truncate_utf8(std::string s, std::size_t limit) {
    if (s.size() <= limit) return s;
    constexpr std::string_view ellipsis = "...";
    std::size_t cut = limit - ellipsis.size();
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    s.resize(cut);
    s += ellipsis;
    return s;
}

std::optional<ErrorCategory> classify(std::string_view text) {
    const std::string s(text);
    for (const auto& rule : rules()) {
        if (std::regex_search(s, rule.pattern)) return rule.category;
    }
    return std::nullopt;
}

} // namespace

std::optional<std::string> remediation_hint(ErrorCategory category) {
    switch (category) {
    case ErrorCategory::crs_mismatch:
        return "Reproject the inputs to a common CRS before combining them.";
    case ErrorCategory::topology_error:
        return "Repair invalid geometries before running this operation.";
    case ErrorCategory::file_locked:
        return "The path was already written by an earlier step; write to a new path or pass "
               "overwrite=true.";
    case ErrorCategory::missing_file:
        return "Check the path against the files present in the workspace.";
    case ErrorCategory::bad_parameter:
        return "Check parameter types and allowed values in the tool definition.";
    case ErrorCategory::timeout:
        return "The call exceeded its time limit; check parameters that control the workload.";
    case ErrorCategory::internal:
        return std::nullopt;
    }
    return std::nullopt;
}

DenoisedError denoise(std::string_view raw, std::optional<ErrorCategory> hint) {
    const auto lines = split_lines(raw);
    std::vector<std::string> content;
    bool traceback = false;
    for (const auto& line : lines) {
        if (std::regex_match(line, frame_line())) {
            traceback = true;
            continue;
        }
        content.push_back(line);
    }

    std::optional<ErrorCategory> category = hint;
    std::string message;
    if (traceback && !content.empty()) {
        // A Python traceback closes with the exception line. Crash dumps end
        // in frames instead, and lead with the fatal error.
        message = std::regex_match(lines.back(), frame_line()) ? content.front() : content.back();
    }
    if (!category && !message.empty()) category = classify(message);
    if (!category) {
        for (const auto& line : content) {
            if (auto c = classify(line)) {
                category = c;
                if (message.empty()) message = line;
                break;
            }
        }
    }
    if (message.empty() && !content.empty()) message = content.front();
    if (message.empty()) message = "tool failed without an error message";

    std::smatch m;
    if (std::regex_search(message, m, exception_prefix())) {
        message = m[1].str() + ":" + m.suffix().str();
    }

    DenoisedError out;
    out.category = category.value_or(ErrorCategory::internal);
    out.message = truncate_utf8(collapse_whitespace(message), kMaxDenoisedLength);
    out.hint = remediation_hint(out.category);
    return out;
}

} // namespace geobench
