#pragma once

// Document collections linked from events. Each document carries the
// viewpoints it is assigned to; retrieval narrows a collection to the
// documents of a set of viewpoints.

#include "narratekg/model.hpp"

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace narratekg {

using DocId = std::string;

struct Document {
    DocId doc_id;
    CollectionId collection;
    std::string headline;
    std::string body;
    std::string outlet;
    std::set<ViewpointId> viewpoints;
    std::optional<Date> date;

    /// Headline and body as one context string.
    std::string context() const { return headline + "\n" + body; }
    auto operator<=>(const Document&) const = default;
};

struct DocumentCollection {
    CollectionId id;
    std::vector<DocId> doc_ids;  // sorted
};

/// Optional filters applied while ingesting.
struct CorpusFilters {
    /// Drop a document whose headline has trigram cosine >= this value with
    /// an earlier kept headline of the same collection.
    std::optional<double> dedup_headline_similarity;
    /// Drop dated documents outside [start, end]. Undated documents are kept.
    std::optional<TimeSpec> date_window;
};

struct CorpusIngestOptions {
    /// outlet -> viewpoints, used when a record lists no viewpoints.
    std::map<std::string, std::set<ViewpointId>> outlet_viewpoints;
    /// When nonempty, every document viewpoint must be one of these.
    std::set<ViewpointId> known_viewpoints;
    CorpusFilters filters;
};

class CorpusStore {
public:
    /// Throws SchemaError for duplicate ids or empty viewpoint sets.
    void add(Document doc);

    bool has_collection(const CollectionId& id) const { return collections_.contains(id); }
    const DocumentCollection& collection(const CollectionId& id) const;
    const Document& document(const DocId& id) const;

    /// Documents of `collection` whose viewpoints intersect `viewpoint_filter`
    /// (all documents when absent), ordered by doc_id. Throws NotFoundError
    /// for an unknown collection.
    std::vector<const Document*> documents_for(const CollectionId& collection,
                                               const std::optional<std::set<ViewpointId>>& viewpoint_filter = {}) const;

    const std::map<DocId, Document>& documents() const noexcept { return documents_; }
    const std::map<CollectionId, DocumentCollection>& collections() const noexcept { return collections_; }
    std::size_t size() const noexcept { return documents_.size(); }
    std::size_t dropped() const noexcept { return dropped_; }

    void write(std::ostream& out) const;

private:
    friend CorpusStore ingest_corpus(std::istream&, const CorpusIngestOptions&);

    std::map<DocId, Document> documents_;
    std::map<CollectionId, DocumentCollection> collections_;
    std::size_t dropped_ = 0;
};

/// Reads the line-delimited corpus format. All-or-nothing like ingest_kg().
CorpusStore ingest_corpus(std::istream& in, const CorpusIngestOptions& options = {});
CorpusStore load_corpus(const std::string& path, const CorpusIngestOptions& options = {});

}  // namespace narratekg
