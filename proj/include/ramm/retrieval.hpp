#pragma once
// Domain-aware homogeneous retrieval over narrative embeddings and
// demonstration selection over paired image/text features. Both search the
// train split exhaustively; ties are broken by ascending item id so results
// never depend on storage order.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ramm/corpus.hpp"
#include "ramm/error.hpp"
#include "ramm/linalg.hpp"
#include "ramm/narrative.hpp"

namespace ramm {

/// a·b / (‖a‖‖b‖)
inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "cosine_sim");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw NumericError("cosine_sim: zero vector");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

struct ScoredId {
    std::string id;
    double score = 0.0;

    friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

/// Descending score, then ascending id.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

struct RetrievalResult {
    std::string query_id;
    std::vector<ScoredId> in_domain;
    std::vector<ScoredId> out_domain;

    /// In-domain hits followed by out-of-domain hits, each in rank order.
    std::vector<ScoredId> merged() const {
        std::vector<ScoredId> all = in_domain;
        all.insert(all.end(), out_domain.begin(), out_domain.end());
        return all;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& s : merged()) out.push_back(s.id);
        return out;
    }

    friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

struct DemonstrationChoice {
    std::string query_id;
    std::string chosen_id;
    double sim_v = 0.0;
    double sim_t = 0.0;
    double score = 0.0;

    friend bool operator==(const DemonstrationChoice&, const DemonstrationChoice&) = default;
};

/// Train-split narrative embeddings bucketed by domain.
class RetrievalIndex {
public:
    RetrievalIndex(const NarrativeStore& store, const Corpus& corpus) : store_(&store), corpus_(&corpus) {
        for (std::size_t i : corpus.split_indices(Split::train)) {
            const NewsItem& it = corpus[i];
            const NarrativeRecord* rec = store.find(it.id);
            if (!rec) throw Error("narrative store has no embedding for train item \"" + it.id + "\"");
            buckets_[it.domain].push_back({&it.id, &rec->embedding});
        }
    }

    RetrievalResult retrieve(std::string_view query_id, std::size_t k_in, std::size_t k_out) const {
        const NewsItem* query = corpus_->find(query_id);
        const NarrativeRecord* qrec = store_->find(query_id);
        if (!query || !qrec) throw Error("unknown query id \"" + std::string(query_id) + "\"");

        std::vector<ScoredId> same, other;
        for (const auto& [domain, entries] : buckets_) {
            auto& sink = domain == query->domain ? same : other;
            for (const Entry& e : entries) {
                if (*e.id == query->id) continue;
                sink.push_back({*e.id, cosine_sim(qrec->embedding, *e.embedding)});
            }
        }
        RetrievalResult r;
        r.query_id = query->id;
        r.in_domain = top_k(std::move(same), k_in);
        r.out_domain = top_k(std::move(other), k_out);
        return r;
    }

private:
    struct Entry {
        const std::string* id;
        const Vec* embedding;
    };

    static std::vector<ScoredId> top_k(std::vector<ScoredId> v, std::size_t k) {
        k = std::min(k, v.size());
        std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), ranks_before);
        v.resize(k);
        return v;
    }

    const NarrativeStore* store_;
    const Corpus* corpus_;
    std::map<std::string, std::vector<Entry>> buckets_;
};

/// Top-k_in same-domain and top-k_out other-domain train items by narrative
/// cosine, never including the query itself.
inline RetrievalResult homogeneous_retrieve(const NarrativeStore& store, const Corpus& corpus,
                                            std::string_view query_id, std::size_t k_in, std::size_t k_out) {
    return RetrievalIndex(store, corpus).retrieve(query_id, k_in, k_out);
}

/// Store keyed on features instead of narratives: normalize([v/‖v‖ ‖ t/‖t‖]).
/// Cosine between two such keys is the mean of the image and text cosines.
inline NarrativeStore feature_key_store(const Corpus& corpus) {
    std::vector<NarrativeRecord> records;
    for (const NewsItem& it : corpus.items()) {
        records.push_back({it.id, {}, concat(normalized(it.image_features), normalized(it.text_features))});
    }
    return build_store(std::move(records));
}

/// Train item maximizing (cos_image + cos_text) / 2 against the query; the
/// query itself is never its own demonstration.
inline DemonstrationChoice sra_select(const Corpus& corpus, const NewsItem& query) {
    DemonstrationChoice best;
    bool found = false;
    for (std::size_t i : corpus.split_indices(Split::train)) {
        const NewsItem& cand = corpus[i];
        if (cand.id == query.id) continue;
        const double sv = cosine_sim(query.image_features, cand.image_features);
        const double st = cosine_sim(query.text_features, cand.text_features);
        const double score = (sv + st) / 2.0;
        if (!found || score > best.score || (score == best.score && cand.id < best.chosen_id)) {
            best = {query.id, cand.id, sv, st, score};
            found = true;
        }
    }
    if (!found) throw Error("no demonstration candidates for \"" + query.id + "\": train split is empty");
    return best;
}

}  // namespace ramm
