#pragma once
// Narrative prompts, the offline narrative embedder and the narrative store.

#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ramm/corpus.hpp"
#include "ramm/embeddings.hpp"
#include "ramm/error.hpp"
#include "ramm/linalg.hpp"
#include "ramm/random.hpp"

namespace ramm {

struct NarrativePrompt {
    std::string system;
    std::string user;

    std::string render() const { return "SYSTEM PROMPT\n" + system + "\n\nUSER PROMPT\n" + user; }
};

inline constexpr std::string_view kNarrativeSystemPrompt =
    "Persona: You are an expert AI assistant specializing in media analysis and misinformation detection.\n"
    "Core Task: Your task is to analyze multimodal news content (text and image) and distill its core "
    "abstract narrative or central claim into a single, concise sentence.\n"
    "Constraints:\n"
    "- Focus strictly on the underlying message, not superficial details.\n"
    "- Remain objective and neutral; do not judge the veracity of the claim.\n"
    "- The output MUST be a single sentence.\n"
    "- Your response must contain ONLY the narrative sentence, with no preamble, explanations.";

inline constexpr std::string_view kNarrativeFewShot =
    "Example 1:\n"
    "Text: \"Explosive footage! A poll worker in XX County was caught on a hidden camera shredding "
    "pro-government ballots to rig the election. The proof is undeniable!\"\n"
    "Image: [Multimodal Input: A blurry image of a person standing near paper bins.]\n"
    "Core Narrative: Election fraud has been proven beyond doubt.\n"
    "\n"
    "Example 2:\n"
    "Text: \"Data never lies! This 90-degree voting curve is statistically impossible unless there is "
    "some algorithm at work to cheat!\"\n"
    "Image: [Multimodal Input: A line graph of vote counts showing a sudden, sharp vertical spike.]\n"
    "Core Narrative: Election fraud has been proven beyond doubt.\n";

/// Decoding temperature forwarded to the narrative client.
inline constexpr double kNarrativeTemperature = 0.7;

/// Few-shot distillation prompt with the item's text in the final query slot.
inline NarrativePrompt build_prompt_parts(const NewsItem& item) {
    if (!item.text || item.text->empty()) {
        throw Error("item \"" + item.id + "\" has no text to build a narrative prompt from");
    }
    NarrativePrompt p;
    p.system = std::string(kNarrativeSystemPrompt);
    p.user = std::string(kNarrativeFewShot);
    p.user += "\nFinal Query:\nText: ";
    p.user += *item.text;
    p.user += "\nImage: [Multimodal Input: News image.]\nCore Narrative:";
    return p;
}

inline std::string build_prompt(const NewsItem& item) { return build_prompt_parts(item).render(); }

/// Deterministic feature-hashed embedding: signed hashing of character
/// trigrams and lowercase word tokens, then l2 normalization.
inline Vec embed_narrative(std::string_view text, std::size_t dim, std::uint64_t seed = 0) {
    if (text.empty()) throw Error("cannot embed an empty narrative");
    if (dim < 2) throw DimensionError("narrative embedding dimension must be >= 2");
    Vec v(dim, 0.0);
    const std::uint64_t salt = splitmix64(seed ^ 0x6e617272ULL);
    auto add = [&](std::string_view feature, std::uint64_t kind) {
        const std::uint64_t h = splitmix64(fnv1a64(feature) ^ salt ^ kind);
        const std::size_t bucket = static_cast<std::size_t>(h % dim);
        v[bucket] += ((h >> 63) != 0) ? -1.0 : 1.0;
    };

    std::string lowered;
    lowered.reserve(text.size() + 2);
    lowered.push_back(' ');
    for (char c : text) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    lowered.push_back(' ');

    for (std::size_t i = 0; i + 3 <= lowered.size(); ++i) add(std::string_view(lowered).substr(i, 3), 1);

    std::size_t start = 0;
    for (std::size_t i = 0; i <= lowered.size(); ++i) {
        if (i == lowered.size() || !std::isalnum(static_cast<unsigned char>(lowered[i]))) {
            if (i > start) add(std::string_view(lowered).substr(start, i - start), 2);
            start = i + 1;
        }
    }
    if (norm2(v) == 0.0) v[static_cast<std::size_t>(splitmix64(fnv1a64(text) ^ salt) % dim)] = 1.0;
    return normalized(v);
}

struct NarrativeRecord {
    std::string item_id;
    std::string narrative_text;
    Vec embedding;
};

/// Unit-norm narrative embeddings keyed by item id.
class NarrativeStore {
public:
    NarrativeStore() = default;

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return records_.size(); }
    bool contains(std::string_view id) const { return records_.count(std::string(id)) != 0; }

    const NarrativeRecord* find(std::string_view id) const {
        auto it = records_.find(std::string(id));
        return it == records_.end() ? nullptr : &it->second;
    }

    const Vec& embedding(std::string_view id) const {
        const NarrativeRecord* r = find(id);
        if (!r) throw Error("no narrative embedding for item \"" + std::string(id) + "\"");
        return r->embedding;
    }

    const std::map<std::string, NarrativeRecord>& records() const { return records_; }

    EmbeddingTable to_table() const {
        EmbeddingTable t;
        for (const auto& [id, r] : records_) t.emplace(id, r.embedding);
        return t;
    }

private:
    friend NarrativeStore build_store(std::vector<NarrativeRecord> records);

    std::map<std::string, NarrativeRecord> records_;
    std::size_t dim_ = 0;
};

/// Validates dimensions and ids, and l2-normalizes every embedding.
inline NarrativeStore build_store(std::vector<NarrativeRecord> records) {
    NarrativeStore store;
    for (auto& r : records) {
        if (store.records_.empty()) {
            store.dim_ = r.embedding.size();
        } else if (r.embedding.size() != store.dim_) {
            throw DimensionError("narrative embedding for \"" + r.item_id + "\" has dimension " +
                                 std::to_string(r.embedding.size()) + ", expected " + std::to_string(store.dim_));
        }
        if (!all_finite(r.embedding)) throw NumericError("narrative embedding for \"" + r.item_id + "\" is not finite");
        r.embedding = normalized(r.embedding);
        std::string id = r.item_id;
        if (!store.records_.emplace(id, std::move(r)).second) throw Error("duplicate narrative id \"" + id + "\"");
    }
    return store;
}

inline NarrativeStore build_store(const EmbeddingTable& table) {
    std::vector<NarrativeRecord> records;
    records.reserve(table.size());
    for (const auto& [id, v] : table) records.push_back({id, {}, v});
    return build_store(std::move(records));
}

/// Embeds every item's narrative_text with the offline embedder.
inline NarrativeStore embed_corpus_narratives(const Corpus& corpus, std::size_t dim, std::uint64_t seed) {
    std::vector<NarrativeRecord> records;
    for (const NewsItem& it : corpus.items()) {
        if (!it.narrative_text) continue;
        records.push_back({it.id, *it.narrative_text, embed_narrative(*it.narrative_text, dim, seed)});
    }
    return build_store(std::move(records));
}

}  // namespace ramm
