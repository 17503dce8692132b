#include "revkit/diff.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cstdlib>
#include <vector>

namespace revkit::diff {

namespace {

constexpr int max_line_number = INT_MAX / 4;

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

// git quotes paths containing unusual bytes: "a/caf\303\251.txt"
std::string unquote(std::string_view s)
{
    if (s.size() < 2 || s.front() != '"' || s.back() != '"')
        return std::string(s);
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        char c = s[i];
        if (c != '\\' || i + 2 >= s.size()) {
            out += c;
            continue;
        }
        char e = s[++i];
        switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default:
            if (e >= '0' && e <= '7') {
                int value = e - '0';
                for (int k = 0; k < 2 && i + 2 < s.size() && s[i + 1] >= '0' && s[i + 1] <= '7'; ++k)
                    value = value * 8 + (s[++i] - '0');
                out += static_cast<char>(value);
            } else {
                out += e;
            }
        }
    }
    return out;
}

std::string strip_prefix(std::string path, char side)
{
    if (path.size() > 2 && path[0] == side && path[1] == '/')
        path.erase(0, 2);
    return path;
}

std::string label_to_path(std::string_view label, char side)
{
    // Labels may carry a tab-separated timestamp (GNU diff).
    auto tab = label.find('\t');
    auto raw = label.substr(0, tab);
    if (raw == "/dev/null")
        return {};
    return strip_prefix(unquote(raw), side);
}

void paths_from_git_line(std::string_view rest, FileDiff& file)
{
    // "a/P b/P" is the common unambiguous shape; fall back to splitting at " b/".
    if (rest.size() >= 5 && (rest.size() - 5) % 2 == 0 && starts_with(rest, "a/")) {
        auto len = (rest.size() - 5) / 2;
        auto left = rest.substr(2, len);
        if (rest.substr(2 + len) == std::string(" b/") + std::string(left)) {
            file.old_path = file.new_path = std::string(left);
            return;
        }
    }
    if (!rest.empty() && rest.front() == '"') {
        auto close = rest.find('"', 1);
        while (close != std::string_view::npos && rest[close - 1] == '\\')
            close = rest.find('"', close + 1);
        if (close != std::string_view::npos && close + 1 < rest.size()) {
            file.old_path = strip_prefix(unquote(rest.substr(0, close + 1)), 'a');
            file.new_path = strip_prefix(unquote(rest.substr(close + 2)), 'b');
            return;
        }
    }
    auto sep = rest.find(" b/");
    if (sep == std::string_view::npos)
        sep = rest.find(" \"b/");
    if (sep != std::string_view::npos) {
        file.old_path = strip_prefix(unquote(rest.substr(0, sep)), 'a');
        file.new_path = strip_prefix(unquote(rest.substr(sep + 1)), 'b');
    }
}

bool parse_number(std::string_view& s, int& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr == s.data() || out < 0 || out > max_line_number)
        return false;
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
    return true;
}

bool parse_range(std::string_view& s, char sign, int& start, int& count, bool& omitted)
{
    if (s.empty() || s.front() != sign)
        return false;
    s.remove_prefix(1);
    if (!parse_number(s, start))
        return false;
    if (!s.empty() && s.front() == ',') {
        s.remove_prefix(1);
        omitted = false;
        return parse_number(s, count);
    }
    omitted = true;
    count = 1;
    return true;
}

Hunk parse_hunk_header(std::string_view line, std::size_t line_no)
{
    Hunk h;
    auto s = line.substr(2);
    auto fail = [&] { throw ParseError(ErrorCode::malformed_header, line_no, "bad hunk header: " + std::string(line)); };
    if (s.empty() || s.front() != ' ')
        fail();
    s.remove_prefix(1);
    if (!parse_range(s, '-', h.old_start, h.old_count, h.old_count_omitted))
        fail();
    if (s.empty() || s.front() != ' ')
        fail();
    s.remove_prefix(1);
    if (!parse_range(s, '+', h.new_start, h.new_count, h.new_count_omitted))
        fail();
    if (!starts_with(s, " @@"))
        fail();
    h.section = std::string(s.substr(3));
    return h;
}

bool is_extended_header(std::string_view l)
{
    static constexpr std::string_view prefixes[] = {
        "index ",          "old mode ",          "new mode ",  "deleted file mode ", "new file mode ",
        "similarity index ", "dissimilarity index ", "rename from ", "rename to ",         "copy from ",
        "copy to ",        "Binary files ",
    };
    return std::any_of(std::begin(prefixes), std::end(prefixes), [&](auto p) { return starts_with(l, p); });
}

class Parser {
public:
    explicit Parser(std::string_view text) : lines_(split_lines(text))
    {
        change_.final_newline = text.empty() || text.back() == '\n';
    }

    CodeChange run()
    {
        while (i_ < lines_.size()) {
            auto l = lines_[i_];
            if (l == "-- " && file_open_) {
                for (; i_ < lines_.size(); ++i_)
                    change_.trailer.emplace_back(lines_[i_]);
            } else if (l == "GIT binary patch" && file_open_ && !current().has_labels && current().hunks.empty()) {
                current().binary = true;
                for (; i_ < lines_.size() && !starts_with(lines_[i_], "diff ") && lines_[i_] != "-- "; ++i_)
                    current().header_lines.emplace_back(lines_[i_]);
            } else if (starts_with(l, "diff ")) {
                start_file();
                current().header_lines.emplace_back(l);
                if (starts_with(l, "diff --git "))
                    paths_from_git_line(l.substr(11), current());
                ++i_;
            } else if (starts_with(l, "--- ") && i_ + 1 < lines_.size() && starts_with(lines_[i_ + 1], "+++ ") &&
                       (!file_open_ || !current().has_labels)) {
                if (!file_open_)
                    start_file();
                read_labels();
            } else if (starts_with(l, "--- ") && i_ + 1 < lines_.size() && starts_with(lines_[i_ + 1], "+++ ")) {
                start_file();
                read_labels();
            } else if (starts_with(l, "@@")) {
                if (!file_open_ || !current().has_labels)
                    throw ParseError(ErrorCode::malformed_header, i_ + 1, "hunk without ---/+++ file header");
                read_hunk();
            } else if (file_open_ && !current().has_labels && current().hunks.empty() && is_extended_header(l)) {
                read_extended_header(l);
                ++i_;
            } else if (!file_open_) {
                change_.preamble.emplace_back(l);
                ++i_;
            } else if (!l.empty() && (l[0] == ' ' || l[0] == '+' || l[0] == '-') && !current().hunks.empty()) {
                throw ParseError(ErrorCode::inconsistent_hunk_counts, i_ + 1,
                                 "hunk contains more lines than its header declares");
            } else {
                throw ParseError(ErrorCode::malformed_header, i_ + 1, "unexpected line in file header");
            }
        }
        return std::move(change_);
    }

private:
    FileDiff& current() { return change_.files.back(); }

    void start_file()
    {
        change_.files.emplace_back();
        file_open_ = true;
    }

    void read_labels()
    {
        auto& f = current();
        f.old_label = std::string(lines_[i_].substr(4));
        f.new_label = std::string(lines_[i_ + 1].substr(4));
        f.has_labels = true;
        f.old_path = label_to_path(f.old_label, 'a');
        f.new_path = label_to_path(f.new_label, 'b');
        i_ += 2;
    }

    void read_extended_header(std::string_view l)
    {
        auto& f = current();
        f.header_lines.emplace_back(l);
        if (starts_with(l, "rename from ") || starts_with(l, "copy from "))
            f.old_path = unquote(l.substr(l.find("from ") + 5));
        else if (starts_with(l, "rename to ") || starts_with(l, "copy to "))
            f.new_path = unquote(l.substr(l.find("to ") + 3));
        else if (starts_with(l, "new file mode "))
            f.old_path.clear();
        else if (starts_with(l, "deleted file mode "))
            f.new_path.clear();
        else if (starts_with(l, "Binary files "))
            f.binary = true;
    }

    void read_hunk()
    {
        const auto header_line = i_ + 1;
        Hunk h = parse_hunk_header(lines_[i_], header_line);
        ++i_;
        int old_left = h.old_count;
        int new_left = h.new_count;
        while (old_left > 0 || new_left > 0) {
            if (i_ >= lines_.size())
                throw ParseError(ErrorCode::inconsistent_hunk_counts, header_line,
                                 "input ends before the hunk's declared line counts are satisfied");
            auto l = lines_[i_];
            const char tag = l.empty() ? '\0' : l[0];
            LineKind kind;
            if (tag == ' ' && old_left > 0 && new_left > 0) {
                kind = LineKind::context;
                --old_left;
                --new_left;
            } else if (tag == '-' && old_left > 0) {
                kind = LineKind::removed;
                --old_left;
            } else if (tag == '+' && new_left > 0) {
                kind = LineKind::added;
                --new_left;
            } else if (tag == '\\' && !h.lines.empty() && h.lines.back().eof_marker.empty()) {
                h.lines.back().eof_marker = std::string(l);
                ++i_;
                continue;
            } else {
                throw ParseError(ErrorCode::inconsistent_hunk_counts, i_ + 1,
                                 "line does not fit the hunk's declared counts");
            }
            h.lines.push_back({kind, std::string(l.substr(1)), {}});
            ++i_;
        }
        if (i_ < lines_.size() && starts_with(lines_[i_], "\\") && !h.lines.empty() && h.lines.back().eof_marker.empty()) {
            h.lines.back().eof_marker = std::string(lines_[i_]);
            ++i_;
        }
        auto& hunks = current().hunks;
        if (!hunks.empty()) {
            const auto& prev = hunks.back();
            if (h.new_start < prev.new_end() || h.old_start < prev.old_end())
                throw ParseError(ErrorCode::inconsistent_hunk_counts, header_line,
                                 "hunk overlaps or precedes the previous hunk");
        }
        if ((h.new_count > 0 && h.new_start == 0) || (h.old_count > 0 && h.old_start == 0))
            throw ParseError(ErrorCode::malformed_header, header_line, "non-empty range starting at line 0");
        hunks.push_back(std::move(h));
    }

    std::vector<std::string_view> lines_;
    std::size_t i_ = 0;
    bool file_open_ = false;
    CodeChange change_;
};

void append_range(std::string& out, int start, int count, bool omitted)
{
    out += std::to_string(start);
    if (!omitted || count != 1) {
        out += ',';
        out += std::to_string(count);
    }
}

}  // namespace

CodeChange parse_unified_diff(std::string_view text)
{
    return Parser(text).run();
}

std::string serialize(const CodeChange& change)
{
    std::string out;
    for (const auto& l : change.preamble) {
        out += l;
        out += '\n';
    }
    for (const auto& f : change.files) {
        for (const auto& l : f.header_lines) {
            out += l;
            out += '\n';
        }
        if (f.has_labels) {
            out += "--- " + f.old_label + "\n";
            out += "+++ " + f.new_label + "\n";
        }
        for (const auto& h : f.hunks) {
            out += "@@ -";
            append_range(out, h.old_start, h.old_count, h.old_count_omitted);
            out += " +";
            append_range(out, h.new_start, h.new_count, h.new_count_omitted);
            out += " @@";
            out += h.section;
            out += '\n';
            for (const auto& l : h.lines) {
                out += l.kind == LineKind::context ? ' ' : l.kind == LineKind::added ? '+' : '-';
                out += l.text;
                out += '\n';
                if (!l.eof_marker.empty()) {
                    out += l.eof_marker;
                    out += '\n';
                }
            }
        }
    }
    for (const auto& l : change.trailer) {
        out += l;
        out += '\n';
    }
    if (!change.final_newline && !out.empty() && out.back() == '\n')
        out.pop_back();
    return out;
}

bool anchor_in_diff(const LineAnchor& anchor, const CodeChange& change)
{
    for (const auto& f : change.files) {
        if (f.new_path.empty() || f.new_path != anchor.file_path)
            continue;
        for (const auto& h : f.hunks)
            if (anchor.line >= h.new_start && anchor.line < h.new_end())
                return true;
    }
    return false;
}

bool location_match(const ReviewComment& a, const ReviewComment& b, int window)
{
    if (a.file_path != b.file_path)
        return false;
    const long long delta = static_cast<long long>(a.line) - b.line;
    return std::llabs(delta) <= window;
}

bool lines_touched(const CodeChange& commit_diff, const LineAnchor& anchor, int window)
{
    for (const auto& f : commit_diff.files) {
        if (f.old_path.empty() || f.old_path != anchor.file_path)
            continue;
        for (const auto& h : f.hunks) {
            int old_line = h.old_start;
            for (const auto& l : h.lines) {
                if (l.kind == LineKind::removed && std::abs(old_line - anchor.line) <= window)
                    return true;
                if (l.kind != LineKind::added)
                    ++old_line;
            }
        }
    }
    return false;
}

std::optional<int> map_line_forward(const CodeChange& commit_diff, std::string_view path, int line)
{
    const FileDiff* file = commit_diff.find_old_path(path);
    if (!file)
        return line;
    if (file->is_deleted())
        return std::nullopt;
    int delta = 0;
    for (const auto& h : file->hunks) {
        int o = h.old_count == 0 ? h.old_start + 1 : h.old_start;
        int n = h.new_count == 0 ? h.new_start + 1 : h.new_start;
        if (line < o)
            return line + delta;
        for (const auto& l : h.lines) {
            switch (l.kind) {
            case LineKind::context:
                if (o == line)
                    return n;
                ++o;
                ++n;
                break;
            case LineKind::removed:
                if (o == line)
                    return std::nullopt;
                ++o;
                break;
            case LineKind::added:
                ++n;
                break;
            }
        }
        delta = n - o;
    }
    return line + delta;
}

std::optional<int> nearest_new_line(const FileDiff& file, int old_line)
{
    for (const auto& h : file.hunks) {
        if (old_line < h.old_start || old_line >= h.old_end())
            continue;
        int o = h.old_start;
        int n = h.new_start;
        for (const auto& l : h.lines) {
            if (l.kind == LineKind::added) {
                ++n;
                continue;
            }
            if (o == old_line) {
                if (l.kind == LineKind::context)
                    return n;
                // Deleted: prefer the next surviving line, else the previous one.
                if (n < h.new_end())
                    return n;
                if (h.new_count > 0)
                    return std::max(1, h.new_end() - 1);
                return std::nullopt;
            }
            ++o;
            if (l.kind == LineKind::context)
                ++n;
        }
    }
    return std::nullopt;
}

}  // namespace revkit::diff
