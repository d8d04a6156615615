#include "narratekg/corpus.hpp"

#include "narratekg/error.hpp"
#include "narratekg/jsonl.hpp"
#include "narratekg/text.hpp"

#include <algorithm>
#include <fstream>

namespace narratekg {

void CorpusStore::add(Document doc) {
    if (doc.doc_id.empty()) throw SchemaError("document id must be nonempty");
    if (doc.collection.empty()) throw SchemaError("document '" + doc.doc_id + "' has no collection");
    if (doc.viewpoints.empty()) throw SchemaError("document '" + doc.doc_id + "' is not assigned to any viewpoint");
    if (documents_.contains(doc.doc_id)) throw SchemaError("duplicate document id '" + doc.doc_id + "'");
    auto& coll = collections_[doc.collection];
    coll.id = doc.collection;
    coll.doc_ids.insert(std::upper_bound(coll.doc_ids.begin(), coll.doc_ids.end(), doc.doc_id), doc.doc_id);
    auto id = doc.doc_id;
    documents_.emplace(std::move(id), std::move(doc));
}

const DocumentCollection& CorpusStore::collection(const CollectionId& id) const {
    auto it = collections_.find(id);
    if (it == collections_.end()) throw NotFoundError("unknown collection '" + id + "'");
    return it->second;
}

const Document& CorpusStore::document(const DocId& id) const {
    auto it = documents_.find(id);
    if (it == documents_.end()) throw NotFoundError("unknown document '" + id + "'");
    return it->second;
}

std::vector<const Document*> CorpusStore::documents_for(const CollectionId& collection,
                                                        const std::optional<std::set<ViewpointId>>& filter) const {
    const auto& coll = this->collection(collection);
    std::vector<const Document*> out;
    for (const auto& id : coll.doc_ids) {
        const auto& doc = documents_.at(id);
        if (filter && std::none_of(doc.viewpoints.begin(), doc.viewpoints.end(),
                                   [&](const ViewpointId& v) { return filter->contains(v); })) {
            continue;
        }
        out.push_back(&doc);
    }
    return out;
}

void CorpusStore::write(std::ostream& out) const {
    using J = jsonl::OrderedJson;
    for (const auto& [id, doc] : documents_) {
        J j{{"doc_id", id},
            {"collection", doc.collection},
            {"outlet", doc.outlet},
            {"viewpoints", doc.viewpoints},
            {"date", doc.date ? J(doc.date->to_string()) : J(nullptr)},
            {"headline", doc.headline},
            {"body", doc.body}};
        out << j.dump() << '\n';
    }
}

CorpusStore ingest_corpus(std::istream& in, const CorpusIngestOptions& options) {
    CorpusStore store;
    // Kept headlines per collection, for the optional dedup filter.
    std::map<CollectionId, std::vector<std::string>> headlines;
    jsonl::for_each_record(in, [&](const jsonl::Json& rec, int line) {
        Document doc;
        doc.doc_id = jsonl::require_string(rec, "doc_id", line);
        doc.collection = jsonl::require_string(rec, "collection", line);
        doc.outlet = jsonl::optional_string(rec, "outlet", line).value_or("");
        for (auto& v : jsonl::optional_string_list(rec, "viewpoints", line)) doc.viewpoints.insert(std::move(v));
        if (auto d = jsonl::optional_string(rec, "date", line)) {
            try {
                doc.date = Date::parse(*d);
            } catch (const SchemaError& e) {
                throw SchemaError(e.what(), line);
            }
        }
        doc.headline = jsonl::optional_string(rec, "headline", line).value_or("");
        doc.body = jsonl::optional_string(rec, "body", line).value_or("");

        if (doc.viewpoints.empty()) {
            if (auto it = options.outlet_viewpoints.find(doc.outlet); it != options.outlet_viewpoints.end()) {
                doc.viewpoints = it->second;
            }
        }
        if (doc.viewpoints.empty()) {
            throw SchemaError("document '" + doc.doc_id + "' is not assigned to any viewpoint", line);
        }
        if (!options.known_viewpoints.empty()) {
            for (const auto& v : doc.viewpoints) {
                if (!options.known_viewpoints.contains(v)) {
                    throw SchemaError("document '" + doc.doc_id + "' has unknown viewpoint '" + v + "'", line);
                }
            }
        }
        if (store.documents_.contains(doc.doc_id)) {
            throw SchemaError("duplicate document id '" + doc.doc_id + "'", line);
        }

        const auto& f = options.filters;
        if (f.date_window && doc.date && !f.date_window->overlaps(TimeSpec::point(*doc.date))) {
            ++store.dropped_;
            return;
        }
        if (f.dedup_headline_similarity) {
            auto& seen = headlines[doc.collection];
            const bool duplicate = std::any_of(seen.begin(), seen.end(), [&](const std::string& h) {
                return text::trigram_cosine(h, doc.headline) >= *f.dedup_headline_similarity;
            });
            if (duplicate) {
                ++store.dropped_;
                return;
            }
            seen.push_back(doc.headline);
        }
        store.add(std::move(doc));
    });
    return store;
}

CorpusStore load_corpus(const std::string& path, const CorpusIngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open corpus file '" + path + "'");
    return ingest_corpus(in, options);
}

}  // namespace narratekg
