#include <doctest.h>

#include "narratekg/text.hpp"
#include "support.hpp"

#include <sstream>

using namespace narratekg;
using testsupport::fixture_path;

namespace {

CorpusIngestOptions options() {
    CorpusIngestOptions o;
    o.outlet_viewpoints = {{"NYT", {"US"}}, {"RT", {"RU"}}, {"Both", {"US", "UK"}}};
    o.known_viewpoints = {"US", "UK", "RU"};
    return o;
}

CorpusStore ingest(const std::string& text, const CorpusIngestOptions& o = options()) {
    std::istringstream in(text);
    return ingest_corpus(in, o);
}

int failing_line(const std::string& text, const CorpusIngestOptions& o = options()) {
    try {
        ingest(text, o);
    } catch (const SchemaError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST_CASE("fixture corpus resolves viewpoints from outlets") {
    const auto w = testsupport::fixture_world();
    CHECK(w.corpus.size() == 20);
    CHECK(w.corpus.collections().size() == 5);
    CHECK(w.corpus.document("ruc22-rt-01").viewpoints == std::set<ViewpointId>{"RU"});
    CHECK(w.corpus.document("ruc22-nyt-01").viewpoints == std::set<ViewpointId>{"US"});
    CHECK(w.corpus.document("ruc22-guardian-01").viewpoints == std::set<ViewpointId>{"UK"});

    const auto ru = w.corpus.documents_for("ruc22-docs", std::set<ViewpointId>{"RU"});
    REQUIRE(ru.size() == 2);
    CHECK(ru[0]->doc_id == "ruc22-rt-01");
    CHECK(ru[1]->doc_id == "ruc22-sputnik-01");
    CHECK(w.corpus.documents_for("gulf-docs", std::set<ViewpointId>{"RU"}).empty());
    CHECK(w.corpus.documents_for("vietnam-docs", std::set<ViewpointId>{"RU"}).empty());
    CHECK_THROWS_AS(w.corpus.documents_for("brownstown-docs"), NotFoundError);
    CHECK_THROWS_AS(w.corpus.document("nope"), NotFoundError);
}

TEST_CASE("retrieval is ordered and filtered by viewpoint intersection") {
    const auto c = ingest(R"({"doc_id": "b", "collection": "c", "outlet": "NYT", "body": "x"}
{"doc_id": "a", "collection": "c", "outlet": "Both", "body": "y"}
{"doc_id": "c", "collection": "c", "outlet": "RT", "body": "z"}
{"doc_id": "d", "collection": "other", "viewpoints": ["UK"], "body": "w"}
)");
    auto ids = [](const std::vector<const Document*>& docs) {
        std::vector<std::string> out;
        for (const auto* d : docs) out.push_back(d->doc_id);
        return out;
    };
    CHECK(ids(c.documents_for("c")) == std::vector<std::string>{"a", "b", "c"});
    CHECK(ids(c.documents_for("c", std::set<ViewpointId>{"US"})) == std::vector<std::string>{"a", "b"});
    CHECK(ids(c.documents_for("c", std::set<ViewpointId>{"UK"})) == std::vector<std::string>{"a"});
    CHECK(ids(c.documents_for("c", std::set<ViewpointId>{"UK", "RU"})) == std::vector<std::string>{"a", "c"});
    CHECK(c.documents_for("c", std::set<ViewpointId>{}).empty());
    CHECK(c.document("b").context() == "\nx");
}

TEST_CASE("corpus ingest errors carry the line") {
    const std::string ok = R"({"doc_id": "a", "collection": "c", "outlet": "NYT"})" "\n";
    CHECK(failing_line(ok) == -1);
    CHECK(failing_line(ok + R"({"doc_id": "b", "collection": "c", "outlet": "Unknown Daily"})" "\n") == 2);
    CHECK(failing_line(ok + R"({"doc_id": "b", "collection": "c", "viewpoints": ["FR"]})" "\n") == 2);
    CHECK(failing_line(ok + "\n" + R"({"doc_id": "a", "collection": "c", "outlet": "NYT"})" "\n") == 3);
    CHECK(failing_line(ok + R"({"collection": "c", "outlet": "NYT"})" "\n") == 2);
    CHECK(failing_line(ok + R"({"doc_id": "b", "collection": "c", "outlet": "NYT", "date": "2022-02-30"})" "\n") == 2);
    CHECK(failing_line(ok + R"({"doc_id": 7, "collection": "c", "outlet": "NYT"})" "\n") == 2);
    CHECK(failing_line(ok + "not json\n") == 2);
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), NotFoundError);
}

TEST_CASE("optional ingest filters") {
    auto o = options();
    o.filters.date_window = TimeSpec::interval(Date::parse("2022-01-01"), Date::parse("2022-12-31"));
    const auto c = ingest(R"({"doc_id": "a", "collection": "c", "outlet": "NYT", "date": "2021-12-31"}
{"doc_id": "b", "collection": "c", "outlet": "NYT", "date": "2022-01-01"}
{"doc_id": "c", "collection": "c", "outlet": "NYT"}
)",
                          o);
    CHECK(c.size() == 2);
    CHECK(c.dropped() == 1);

    auto d = options();
    d.filters.dedup_headline_similarity = 0.9;
    const auto e = ingest(R"({"doc_id": "a", "collection": "c", "outlet": "NYT", "headline": "Troops gather on the border"}
{"doc_id": "b", "collection": "c", "outlet": "NYT", "headline": "Troops gather on the border!"}
{"doc_id": "c", "collection": "other", "outlet": "NYT", "headline": "Troops gather on the border"}
{"doc_id": "d", "collection": "c", "outlet": "NYT", "headline": "Markets were calm"}
)",
                          d);
    CHECK(e.size() == 3);
    CHECK(e.dropped() == 1);
    CHECK_THROWS_AS(e.document("b"), NotFoundError);
}

TEST_CASE("snapshot round trip") {
    const auto w = testsupport::fixture_world();
    std::ostringstream a;
    w.corpus.write(a);
    CorpusIngestOptions o;
    o.known_viewpoints = w.kg.viewpoint_ids();
    const auto again = ingest(a.str(), o);
    CHECK(again.documents() == w.corpus.documents());
    std::ostringstream b;
    again.write(b);
    CHECK(a.str() == b.str());
}

TEST_CASE("trigram cosine") {
    // Reference values from an independent Python computation.
    CHECK(text::trigram_cosine("Russian Federation", "Russia") == doctest::Approx(0.5));
    CHECK(text::trigram_cosine("Russian Federation", "Ukraine") == 0.0);
    CHECK(text::trigram_cosine("banana", "bandana") == doctest::Approx(0.5477225575051661));
    CHECK(text::trigram_cosine("Moscow", "moscow") == doctest::Approx(1.0));
    CHECK(text::trigram_cosine("ab", "AB") == doctest::Approx(1.0));
    CHECK(text::trigram_cosine("ab", "abc") == 0.0);
    CHECK(text::trigram_cosine("", "abc") == 0.0);
}

TEST_CASE("tokenizer keeps dotted and hyphenated words") {
    const auto t = text::tokenize("The U.S. signed a cease-fire. Moscow's reply came!\nNext");
    std::vector<std::string> words;
    for (const auto& tok : t) words.push_back(tok.text);
    CHECK(words == std::vector<std::string>{"The", "U.S", "signed", "a", "cease-fire", "Moscow's", "reply", "came", "Next"});
    CHECK(t[1].sentence_end);
    CHECK(t[4].sentence_end);
    CHECK(t[7].sentence_end);
    CHECK_FALSE(t[8].sentence_end);
    CHECK(text::phrase_tokens("Launched an  Offensive") == std::vector<std::string>{"launched", "an", "offensive"});
}
