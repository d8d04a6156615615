#include <doctest.h>

#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Run cli(const std::string& args, const std::string& stdin_text = "") {
    std::string cmd = quote(NARRATEKG_CLI_PATH) + " " + args + " 2>&1";
    fs::path input;
    if (!stdin_text.empty()) {
        input = fs::temp_directory_path() / "narratekg_cli_stdin.txt";
        std::ofstream(input) << stdin_text;
        cmd += " < " + quote(input.string());
    } else {
        cmd += " < /dev/null";
    }
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (!input.empty()) fs::remove(input);
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int serial = 0;
        path = fs::temp_directory_path() / ("narratekg_cli_" + std::to_string(::getpid()) + "_" + std::to_string(serial++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name, const std::string& content) const {
        std::ofstream(path / name) << content;
        return (path / name).string();
    }
};

std::string fixture(const std::string& name) { return quote(testsupport::fixture_path(name).string()); }

std::string ingest_fixture(const TempDir& d) {
    const auto ws = quote((d.path / "ws").string());
    const auto r = cli("ingest -w " + ws + " --kg " + fixture("kg.jsonl") + " --corpus " + fixture("corpus.jsonl") +
                       " --config " + fixture("config.json"));
    REQUIRE(r.code == 0);
    return ws;
}

}  // namespace

TEST_CASE("ingest, build-index and query the fixture") {
    TempDir d;
    const auto ws = ingest_fixture(d);
    CHECK(fs::exists(d.path / "ws" / "kg.jsonl"));
    CHECK(fs::exists(d.path / "ws" / "corpus.jsonl"));
    CHECK(fs::exists(d.path / "ws" / "config.json"));

    auto r = cli("build-index -w " + ws);
    CHECK(r.code == 0);
    CHECK(fs::exists(d.path / "ws" / "index.bin"));
    CHECK(fs::exists(d.path / "ws" / "logs" / "positives.jsonl"));
    CHECK(r.out.find("fine   is_aggressor/US") != std::string::npos);

    r = cli("build-index -w " + ws + " --source log");
    CHECK(r.code == 0);

    r = cli("query -w " + ws + " " + quote("MATCH SUPERTYPE conflict BIND p WHERE role(p) = winner AND is_underdog(p)"));
    CHECK(r.code == 0);
    CHECK(r.out.find("VietnamWar  [p = NorthVietnam]") != std::string::npos);
    CHECK(r.out.find("GulfWar") == std::string::npos);

    const auto report = (d.path / "report.json").string();
    r = cli("query -w " + ws + " --report " + quote(report) + " " +
            quote("MATCH EVENT RUC22 BIND x WHERE name(x) = \"Russia\" AND is_aggressor(x) FROM {US, UK}"));
    CHECK(r.code == 0);
    CHECK(r.out.find("RUC22  [x = Russia]") != std::string::npos);
    CHECK(r.out.find("evidence is_aggressor(Russia) from US") != std::string::npos);
    CHECK(fs::exists(report));

    r = cli("query -w " + ws + " --no-index -f " + quote(d.file("q.txt", "MATCH TYPE crisis WHERE participant_count_at_least(4)")));
    CHECK(r.code == 0);
    CHECK(r.out.find("Crimea2014") != std::string::npos);

    // One prototype per stdin line; a bad line does not end the session.
    r = cli("query -w " + ws, "MATCH EVENT GulfWar\nMATCH EVENT\nMATCH EVENT IraqWar\n");
    CHECK(r.code == 0);
    CHECK(r.out.find("GulfWar") != std::string::npos);
    CHECK(r.out.find("IraqWar") != std::string::npos);

    const auto runs = testsupport::read_file(d.path / "ws" / "logs" / "runs.jsonl");
    CHECK(std::count(runs.begin(), runs.end(), '\n') >= 6);
}

TEST_CASE("user errors exit with 1") {
    TempDir d;
    const auto ws = ingest_fixture(d);

    auto r = cli("query -w " + ws + " " + quote("MATCH SUPERTYPE conflict BIND p\nWHERE is_aggressor(q)"));
    CHECK(r.code == 1);
    CHECK(r.out.find("error: 2:20: unbound variable q") != std::string::npos);
    CHECK(r.out.find("                     ^") != std::string::npos);

    r = cli("query -w " + ws + " " + quote("MATCH EVENT RUC22 BIND x WHERE is_brave(x)"));
    CHECK(r.code == 1);
    CHECK(r.out.find("unknown attribution 'is_brave'") != std::string::npos);

    CHECK(cli("build-index -w " + ws + " --fpr 1.5").code == 1);
    CHECK(cli("build-index -w " + ws + " --fpr 0").code == 1);
    CHECK(cli("bench -w " + ws + " -p " + quote(d.file("empty.txt", "# nothing\n"))).code == 2);  // no index yet
    CHECK(cli("build-index -w " + ws).code == 0);
    r = cli("bench -w " + ws + " -p " + quote(d.file("empty.txt", "# nothing\n")));
    CHECK(r.code == 1);
    CHECK(r.out.find("contains no prototypes") != std::string::npos);
    CHECK(cli("frobnicate").code == 1);
    CHECK(cli("query --bogus-flag").code == 1);

    const auto bad_corpus = d.file("corpus.jsonl", R"({"doc_id": "a", "collection": "c", "viewpoints": ["US"]}
{"doc_id": "b", "collection": "c", "outlet": "Nowhere Gazette"}
)");
    r = cli("ingest -w " + quote((d.path / "ws2").string()) + " --kg " + fixture("kg.jsonl") + " --corpus " +
            quote(bad_corpus) + " --config " + fixture("config.json"));
    CHECK(r.code == 1);
    CHECK(r.out.find("line 2") != std::string::npos);
    CHECK_FALSE(fs::exists(d.path / "ws2" / "kg.jsonl"));
}

TEST_CASE("environment errors exit with 2") {
    TempDir d;
    auto r = cli("ingest -w " + quote((d.path / "ws").string()) + " --kg /nonexistent/kg.jsonl --corpus " +
                 fixture("corpus.jsonl"));
    CHECK(r.code == 2);
    CHECK(cli("query -w " + quote((d.path / "missing").string()) + " " + quote("MATCH EVENT RUC22")).code == 2);

    const auto ws = ingest_fixture(d);
    CHECK(cli("build-index -w " + ws).code == 0);
    {
        std::fstream f(d.path / "ws" / "index.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(40);
        f.put('\x7f');
    }
    r = cli("query -w " + ws + " " + quote("MATCH EVENT RUC22"));
    CHECK(r.code == 2);
    CHECK(r.out.find("index") != std::string::npos);
    CHECK(cli("build-index -w " + ws + " --source log --log /nonexistent/log.jsonl").code == 2);
}

TEST_CASE("RvU on an empty corpus is a clean miss") {
    TempDir d;
    const auto ws = quote((d.path / "ws").string());
    const auto empty = d.file("corpus.jsonl", "");
    CHECK(cli("ingest -w " + ws + " --kg " + fixture("kg.jsonl") + " --corpus " + quote(empty) + " --config " +
              fixture("config.json"))
              .code == 0);
    CHECK(cli("build-index -w " + ws).code == 0);
    const auto r = cli("query -w " + ws + " " +
                       quote("MATCH EVENT RUC22 BIND x WHERE name(x) = \"Russia\" AND is_aggressor(x) FROM {US, UK}"));
    CHECK(r.code == 0);
    CHECK(r.out.find("no matching events") != std::string::npos);
}

TEST_CASE("bench over the fixture") {
    TempDir d;
    const auto ws = ingest_fixture(d);
    REQUIRE(cli("build-index -w " + ws).code == 0);
    const auto report = (d.path / "bench.json").string();
    const auto r = cli("bench -w " + ws + " -p " + fixture("prototypes.txt") + " -r 1 --assessor-delay 1 --report " +
                       quote(report));
    CHECK(r.code == 0);
    CHECK(r.out.find("aggregate speedup") != std::string::npos);
    CHECK(r.out.find("DIVERGED") == std::string::npos);
    CHECK(fs::exists(report));
    CHECK(cli("bench -w " + ws + " -p " + fixture("prototypes.txt") + " --assessor-delay -1").code == 1);
}

TEST_CASE("a stale index against a changed assessor is an invariant breach") {
    // Remote assessor that knows nothing while the index is built, then
    // starts naming Russia in RU documents.
    std::atomic<bool> informed{false};
    httplib::Server svc;
    svc.Post("/assess", [&](const httplib::Request& req, httplib::Response& res) {
        const auto j = nlohmann::json::parse(req.body);
        const bool hit = informed && j["context"].get<std::string>().find("Kyiv") != std::string::npos;
        res.set_content(hit ? R"({"answer": "Moscow", "confidence": 0.9, "canonical_target": "Russia", "similarity": 1.0})"
                            : R"({"answer": "", "confidence": 0.0, "canonical_target": null, "similarity": 0.0})",
                        "application/json");
    });
    const int port = svc.bind_to_any_port("127.0.0.1");
    std::thread server([&] { svc.listen_after_bind(); });
    svc.wait_until_ready();

    TempDir d;
    auto config = nlohmann::json::parse(testsupport::read_file(testsupport::fixture_path("config.json")));
    config["assessor"] = {{"kind", "remote"}, {"url", "http://127.0.0.1:" + std::to_string(port)}, {"timeout_ms", 2000}};
    const auto ws = quote((d.path / "ws").string());
    REQUIRE(cli("ingest -w " + ws + " --kg " + fixture("kg.jsonl") + " --corpus " + fixture("corpus.jsonl") +
                " --config " + quote(d.file("config.json", config.dump())))
                .code == 0);
    REQUIRE(cli("build-index -w " + ws).code == 0);
    informed = true;
    const auto protos =
        d.file("p.txt", "RvR: MATCH EVENT RUC22 BIND x WHERE name(x) = \"Russia\" AND is_aggressor(x) FROM {RU}\n");
    const auto r = cli("bench -w " + ws + " -p " + quote(protos) + " -r 1");
    CHECK(r.code == 3);
    CHECK(r.out.find("DIVERGED") != std::string::npos);
    CHECK(r.out.find("invariant breach") != std::string::npos);
    svc.stop();
    server.join();
}
