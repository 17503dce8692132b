#include "revkit/generation.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "revkit/diff.hpp"
#include "revkit/llm.hpp"

namespace revkit::generation {

using nlohmann::json;

namespace {

std::string lowercase(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

ParseResult parse_candidates(std::string_view raw, const CodeChange& change, std::string_view id_prefix)
{
    ParseResult out;
    auto block = llm::extract_fenced_json(raw);
    if (!block) {
        out.discards.push_back({"grammar", "no fenced block"});
        return out;
    }
    auto parsed = json::parse(*block, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
        out.discards.push_back({"grammar", "fenced block is not a JSON array"});
        return out;
    }

    int n = 0;
    for (const auto& rec : parsed) {
        ++n;
        const std::string id = std::string(id_prefix) + "-" + std::to_string(n);
        if (!rec.is_object() || !rec.contains("file_path") || !rec["file_path"].is_string() ||
            !rec.contains("line") || !rec["line"].is_number_integer() || !rec.contains("body") ||
            !rec["body"].is_string()) {
            out.discards.push_back({"grammar", id + ": record lacks file_path/line/body"});
            continue;
        }
        ReviewComment c;
        c.comment_id = id;
        c.origin = Origin::generated;
        c.file_path = rec["file_path"].get<std::string>();
        c.line = rec["line"].get<int>();
        c.body = rec["body"].get<std::string>();
        if (c.body.empty() || c.file_path.empty() || c.line < 1) {
            out.discards.push_back({"grammar", id + ": empty body, empty path or line < 1"});
            continue;
        }
        if (rec.contains("category") && rec["category"].is_string())
            c.category = lowercase(rec["category"].get<std::string>());
        if (!diff::anchor_in_diff(diff::anchor_of(c), change)) {
            out.discards.push_back({"anchor-out-of-diff", id + ": " + c.file_path + ":" + std::to_string(c.line)});
            continue;
        }
        out.candidates.push_back(std::move(c));
    }
    return out;
}

std::vector<ReviewComment> dedupe(const std::vector<ReviewComment>& candidates, int max_comments)
{
    std::vector<ReviewComment> out;
    std::set<std::pair<std::string, int>> seen;
    for (const auto& c : candidates) {
        if (static_cast<int>(out.size()) >= max_comments)
            break;
        if (seen.insert({c.file_path, c.line}).second)
            out.push_back(c);
    }
    return out;
}

}  // namespace revkit::generation
