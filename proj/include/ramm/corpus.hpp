#pragma once
// News corpus data model and the newline-delimited JSON record format.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramm/error.hpp"
#include "ramm/linalg.hpp"

namespace ramm {

enum class Split { train, test };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline std::optional<Split> parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    return std::nullopt;
}

/// One multimodal news sample with pre-extracted features.
struct NewsItem {
    std::string id;
    std::string domain;
    Vec text_features;
    Vec image_features;
    int label = 0;  // 0 = real, 1 = fake
    Split split = Split::train;
    std::optional<std::string> narrative_text;
    std::optional<std::string> text;       // raw news text, used for prompting
    std::optional<std::string> image_ref;  // opaque media reference

    /// Image features followed by text features, the order the encoder consumes.
    Vec features() const { return concat(image_features, text_features); }

    friend bool operator==(const NewsItem&, const NewsItem&) = default;
};

class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<NewsItem> items) : items_(std::move(items)) {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < items_.size(); ++i) {
            const NewsItem& it = items_[i];
            if (it.id.empty()) throw Error("item " + std::to_string(i) + " has an empty id");
            if (!seen.insert(it.id).second) throw Error("duplicate id \"" + it.id + "\"");
            if (it.label != 0 && it.label != 1) throw Error("item \"" + it.id + "\": label must be 0 or 1");
            if (i > 0) {
                if (it.text_features.size() != items_[0].text_features.size()) {
                    throw DimensionError("item \"" + it.id + "\": text_features has " +
                                         std::to_string(it.text_features.size()) + " entries, expected " +
                                         std::to_string(items_[0].text_features.size()));
                }
                if (it.image_features.size() != items_[0].image_features.size()) {
                    throw DimensionError("item \"" + it.id + "\": image_features has " +
                                         std::to_string(it.image_features.size()) + " entries, expected " +
                                         std::to_string(items_[0].image_features.size()));
                }
            }
            index_by_id_.emplace(it.id, i);
            domain_index_[it.domain].push_back(i);
            split_index_[it.split].push_back(i);
        }
    }

    const std::vector<NewsItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const NewsItem& operator[](std::size_t i) const { return items_[i]; }

    const NewsItem* find(std::string_view id) const {
        auto it = index_by_id_.find(std::string(id));
        return it == index_by_id_.end() ? nullptr : &items_[it->second];
    }

    const NewsItem& at(std::string_view id) const {
        const NewsItem* p = find(id);
        if (!p) throw Error("unknown item id \"" + std::string(id) + "\"");
        return *p;
    }

    /// Item positions per domain, in corpus order.
    const std::map<std::string, std::vector<std::size_t>>& domain_index() const { return domain_index_; }

    std::vector<std::size_t> split_indices(Split s) const {
        auto it = split_index_.find(s);
        return it == split_index_.end() ? std::vector<std::size_t>{} : it->second;
    }

    std::vector<std::string> split_ids(Split s) const {
        std::vector<std::string> ids;
        for (std::size_t i : split_indices(s)) ids.push_back(items_[i].id);
        return ids;
    }

    std::size_t text_dim() const { return items_.empty() ? 0 : items_[0].text_features.size(); }
    std::size_t image_dim() const { return items_.empty() ? 0 : items_[0].image_features.size(); }
    std::size_t feature_dim() const { return text_dim() + image_dim(); }

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.items_ == b.items_; }

private:
    std::vector<NewsItem> items_;
    std::map<std::string, std::size_t> index_by_id_;
    std::map<std::string, std::vector<std::size_t>> domain_index_;
    std::map<Split, std::vector<std::size_t>> split_index_;
};

namespace detail {

inline Vec json_to_vec(const nlohmann::json& j, const char* field, std::size_t line) {
    if (!j.is_array()) throw ParseError(line, std::string("field \"") + field + "\" must be an array of numbers");
    Vec v;
    v.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) throw ParseError(line, std::string("field \"") + field + "\" contains a non-number");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw ParseError(line, std::string("field \"") + field + "\" contains a non-finite value");
        v.push_back(d);
    }
    return v;
}

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* field, std::size_t line) {
    auto it = j.find(field);
    if (it == j.end()) throw ParseError(line, std::string("missing field \"") + field + "\"");
    return *it;
}

inline std::string require_string(const nlohmann::json& j, const char* field, std::size_t line) {
    const auto& v = require_field(j, field, line);
    if (!v.is_string()) throw ParseError(line, std::string("field \"") + field + "\" must be a string");
    return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* field, std::size_t line) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(line, std::string("field \"") + field + "\" must be a string");
    return it->get<std::string>();
}

inline nlohmann::json parse_line(const std::string& text, std::size_t line) {
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw ParseError(line, "record is not an object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line, std::string("malformed record: ") + e.what());
    }
}

}  // namespace detail

inline NewsItem item_from_json(const nlohmann::json& j, std::size_t line) {
    NewsItem it;
    it.id = detail::require_string(j, "id", line);
    it.domain = detail::require_string(j, "domain", line);
    const auto& label = detail::require_field(j, "label", line);
    if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1)) {
        throw ParseError(line, "field \"label\" must be 0 or 1");
    }
    it.label = label.get<int>();
    const std::string split = detail::require_string(j, "split", line);
    const auto s = parse_split(split);
    if (!s) throw ParseError(line, "unknown split \"" + split + "\"");
    it.split = *s;
    it.text_features = detail::json_to_vec(detail::require_field(j, "text_features", line), "text_features", line);
    it.image_features = detail::json_to_vec(detail::require_field(j, "image_features", line), "image_features", line);
    it.narrative_text = detail::optional_string(j, "narrative_text", line);
    it.text = detail::optional_string(j, "text", line);
    it.image_ref = detail::optional_string(j, "image_ref", line);
    return it;
}

inline nlohmann::json item_to_json(const NewsItem& it) {
    nlohmann::json j;
    j["id"] = it.id;
    j["domain"] = it.domain;
    j["label"] = it.label;
    j["split"] = std::string(to_string(it.split));
    j["text_features"] = it.text_features;
    j["image_features"] = it.image_features;
    if (it.narrative_text) j["narrative_text"] = *it.narrative_text;
    if (it.text) j["text"] = *it.text;
    if (it.image_ref) j["image_ref"] = *it.image_ref;
    return j;
}

/// Parses a corpus from newline-delimited records. Blank lines are ignored.
inline Corpus parse_corpus(std::istream& in) {
    std::vector<NewsItem> items;
    std::set<std::string> ids;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        NewsItem it = item_from_json(detail::parse_line(text, line), line);
        if (!ids.insert(it.id).second) throw ParseError(line, "duplicate id \"" + it.id + "\"");
        if (!items.empty()) {
            if (it.text_features.size() != items.front().text_features.size() ||
                it.image_features.size() != items.front().image_features.size()) {
                throw ParseError(line, "feature dimension mismatch for \"" + it.id + "\": text " +
                                           std::to_string(it.text_features.size()) + "/image " +
                                           std::to_string(it.image_features.size()) + " vs text " +
                                           std::to_string(items.front().text_features.size()) + "/image " +
                                           std::to_string(items.front().image_features.size()));
            }
        }
        items.push_back(std::move(it));
    }
    return Corpus(std::move(items));
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path);
    return parse_corpus(in);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const NewsItem& it : corpus.items()) out << item_to_json(it).dump() << '\n';
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file " + path);
    write_corpus(out, corpus);
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace ramm
