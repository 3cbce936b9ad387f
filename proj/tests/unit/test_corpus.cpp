#include <doctest.h>

#include <map>
#include <sstream>

#include "helpers.hpp"
#include "sciline/corpus.hpp"

using namespace sciline;
using testing::paper;

namespace {

std::string line(const std::string& id, int year, const std::string& extra = "") {
    return R"({"paper_id":")" + id + R"(","year":)" + std::to_string(year) + extra + "}\n";
}

Corpus with_dois(const std::vector<std::pair<std::string, std::optional<std::string>>>& rows) {
    std::vector<PaperRecord> ps;
    for (const auto& [id, doi] : rows) {
        auto p = paper(id, 2000);
        p.doi = doi;
        ps.push_back(p);
    }
    return Corpus::from_records(ps);
}

}  // namespace

TEST_SUITE("corpus") {
    TEST_CASE("empty file gives an empty corpus") {
        const auto dir = testing::scratch("corpus_empty");
        testing::write_text(dir / "c.ndjson", "");
        const auto r = load_corpus({dir / "c.ndjson"});
        CHECK(r.corpus.size() == 0);
        CHECK(r.rejects.empty());
    }

    TEST_CASE("a line without year is rejected with its line number") {
        const auto dir = testing::scratch("corpus_rejects");
        testing::write_text(dir / "c.ndjson", line("a", 2000) + line("b", 2001) + R"({"paper_id":"c"})" "\n" +
                                                  line("d", 2002));
        const auto r = load_corpus({dir / "c.ndjson"});
        CHECK(r.corpus.size() == 3);
        REQUIRE(r.rejects.size() == 1);
        CHECK(r.rejects[0].line == 3);
        CHECK(r.rejects[0].reason == "missing year");
        std::ostringstream o;
        write_rejects_csv(o, r.rejects);
        CHECK(o.str() == "line,reason\n3,missing year\n");

        // two files: the reason says which one
        std::vector<RejectedLine> two{r.rejects[0], r.rejects[0]};
        two[1].file = "other.ndjson";
        std::ostringstream o2;
        write_rejects_csv(o2, two);
        CHECK(o2.str().find("\n3,other.ndjson: missing year\n") != std::string::npos);
    }

    TEST_CASE("other malformed lines are reported, never dropped silently") {
        const auto dir = testing::scratch("corpus_bad_lines");
        testing::write_text(dir / "c.ndjson", "{not json\n" + line("old", 1700) + line("s", 2000, R"(,"reference_ids":["s"])") +
                                                  line("d", 2000, R"(,"submitted":"2020-13-01")") + line("ok", 2000));
        const auto r = load_corpus({dir / "c.ndjson"});
        CHECK(r.corpus.size() == 1);
        REQUIRE(r.rejects.size() == 4);
        CHECK(r.rejects[0].reason == "malformed json");
        CHECK(r.rejects[1].reason == "year before 1800");
        CHECK(r.rejects[2].reason == "self reference");
        CHECK(r.rejects[3].line == 4);
    }

    TEST_CASE("duplicate paper ids are a hard error naming the id") {
        const auto dir = testing::scratch("corpus_dup");
        testing::write_text(dir / "a.ndjson", line("x1", 2000));
        testing::write_text(dir / "b.ndjson", line("x1", 2001));
        try {
            load_corpus({dir / "a.ndjson", dir / "b.ndjson"});
            FAIL("expected duplicate error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::duplicate_key);
            CHECK(std::string(e.what()).find("x1") != std::string::npos);
        }
    }

    TEST_CASE("schema header must match") {
        const auto dir = testing::scratch("corpus_schema");
        testing::write_text(dir / "c.ndjson", "{\"schema_version\":\"2\"}\n" + line("a", 2000));
        CHECK_THROWS_AS(load_corpus({dir / "c.ndjson"}), Error);
        CHECK(load_corpus({dir / "c.ndjson"}, "2").corpus.size() == 1);
        CHECK_THROWS_AS(load_corpus({dir / "missing.ndjson"}), Error);
    }

    TEST_CASE("loading is idempotent") {
        const auto dir = testing::scratch("corpus_idem");
        testing::write_text(dir / "c.ndjson",
                            line("b", 2001, R"(,"fields_l1":["y","x"],"author_ids":["u2","u1"],"doi":"10.1/b")") +
                                line("a", 2000, R"(,"reference_ids":["b","zz"],"accepted":"2000-05-01")"));
        std::ostringstream one, two;
        load_corpus({dir / "c.ndjson"}).corpus.dump_index(one);
        load_corpus({dir / "c.ndjson"}).corpus.dump_index(two);
        CHECK(one.str() == two.str());
        CHECK_FALSE(one.str().empty());
    }

    TEST_CASE("json lines round trip through the writer") {
        const auto dir = testing::scratch("corpus_roundtrip");
        auto p = paper("q", 1999, {"r1", "r2"}, {"f1", "f2"});
        p.doi = "10.9/q";
        p.journal = "J";
        p.issue_order = 3;
        p.author_ids = {"z", "a"};
        p.concept_ids = {"c1"};
        p.history.submitted = *parse_iso_date("1999-01-02");
        p.history.accepted = *parse_iso_date("1999-03-04");
        const auto text = paper_to_json_line(p);
        auto parsed = parse_paper_line(text);
        REQUIRE(std::holds_alternative<PaperRecord>(parsed));
        const auto& q = std::get<PaperRecord>(parsed);
        CHECK(paper_to_json_line(q) == text);
        CHECK(q.author_ids == std::vector<std::string>{"z", "a"});  // order kept
    }

    TEST_CASE("dedupe removes every DOI sharer") {
        SUBCASE("five records share one DOI") {
            std::vector<std::pair<std::string, std::optional<std::string>>> rows;
            for (int i = 16398630; i <= 16398634; ++i) rows.push_back({std::to_string(i), "10.1/same"});
            const auto r = dedupe_by_doi(with_dois(rows));
            CHECK(r.removed_count == 5);
            CHECK(r.corpus.size() == 0);
        }
        SUBCASE("all distinct") {
            const auto r = dedupe_by_doi(with_dois({{"a", "d1"}, {"b", "d2"}, {"c", std::nullopt}}));
            CHECK(r.removed_count == 0);
            CHECK(r.corpus.size() == 3);
        }
        SUBCASE("two sharers and three unique") {
            const auto r =
                dedupe_by_doi(with_dois({{"a", "d1"}, {"b", "d1"}, {"c", "d2"}, {"d", std::nullopt}, {"e", "d3"}}));
            CHECK(r.removed_count == 2);
            CHECK(r.corpus.size() == 3);
            CHECK(r.corpus.find("a") == nullptr);
        }
        SUBCASE("result is closed under DOI sharing") {
            Rng rng(9);
            std::vector<std::pair<std::string, std::optional<std::string>>> rows;
            for (int i = 0; i < 300; ++i) {
                std::optional<std::string> doi;
                if (uniform01(rng) < 0.8) doi = "d" + std::to_string(uniform_index(rng, 200));
                rows.push_back({"p" + std::to_string(i), doi});
            }
            const auto before = with_dois(rows);
            const auto r = dedupe_by_doi(before);
            std::map<std::string, int> counts;
            for (const auto& p : r.corpus.papers())
                if (p.doi) ++counts[*p.doi];
            for (const auto& [d, n] : counts) CHECK(n == 1);
            CHECK(r.corpus.size() + r.removed_count == before.size());
        }
    }

    TEST_CASE("cohort views and field sizes") {
        std::vector<PaperRecord> ps;
        for (int i = 0; i < 4; ++i) ps.push_back(paper("d" + std::to_string(i), 1964, {}, {"dft"}));
        ps.push_back(paper("multi", 1964, {}, {"dft", "optics"}));
        ps.push_back(paper("late", 1965, {}, {"dft"}));
        ps.push_back(paper("noemb", 1964, {}, {"dft"}));
        auto store = std::make_shared<EmbeddingStore>(2);
        for (const auto& p : ps) {
            if (p.paper_id == "noemb") continue;
            const float v[2] = {1.0f, 0.5f};
            store->add(p.paper_id, v);
        }
        const auto c = Corpus::from_records(ps, store);

        const auto dft = cohort_view(c, 1964, "dft");
        CHECK(dft.members == std::vector<std::string>{"d0", "d1", "d2", "d3", "multi"});
        CHECK(cohort_view(c, 1964, "optics").members == std::vector<std::string>{"multi"});
        CHECK(cohort_view(c, 1990, "dft").members.empty());
        CHECK_THROWS_AS(cohort_view(c, 1964, "nope"), Error);

        CHECK(field_size(c, 1964, "dft") == 6);  // counts the unembedded paper
        CHECK(field_size(c, 1964, "optics") == 1);
        CHECK(field_size(c, 2000, "dft") == 0);
        CHECK_THROWS_AS(field_size(c, 1964, "nope"), Error);

        // union of cohorts covers embedded papers with multiplicity |fields_l1|
        std::map<std::string, std::size_t> seen;
        for (const auto& k : c.cohort_keys())
            for (const auto& m : cohort_view(c, k.year, k.field).members) ++seen[m];
        std::size_t embedded = 0;
        for (const auto& p : c.papers()) {
            if (!p.embedding_ref) {
                CHECK(seen.count(p.paper_id) == 0);
                continue;
            }
            ++embedded;
            CHECK(seen[p.paper_id] == p.fields_l1.size());
        }
        CHECK(embedded == c.embedded_count());
    }

    TEST_CASE("field size fixture of seven") {
        std::vector<PaperRecord> ps;
        for (int i = 0; i < 7; ++i) ps.push_back(paper("p" + std::to_string(i), 2001, {}, {"g"}));
        ps.push_back(paper("other", 2002, {}, {"g"}));
        CHECK(field_size(Corpus::from_records(ps), 2001, "g") == 7);
    }

    TEST_CASE("record invariants") {
        CHECK_THROWS_AS(Corpus::from_records({paper("a", 2000, {"a"})}), Error);
        CHECK_THROWS_AS(Corpus::from_records({paper("a", 1700)}), Error);
    }

    TEST_CASE("embedding files") {
        const auto dir = testing::scratch("corpus_emb");
        EmbeddingStore s(3);
        const float a[3] = {1.0f, -2.5f, 0.125f};
        const float b[3] = {0.0f, 3.0f, 1e-7f};
        s.add("a", a);
        s.add("bb", b);
        write_embeddings(dir / "e.bin", s);
        const auto r = read_embeddings(dir / "e.bin");
        CHECK(r.dim() == 3);
        REQUIRE(r.size() == 2);
        CHECK(r.id_at(1) == "bb");
        CHECK(r.row(*r.row_of("a"))[1] == -2.5f);
        CHECK(testing::read_text(dir / "e.bin").substr(0, 5) == "SCIV1");

        const float bad[3] = {1.0f, std::nanf(""), 0.0f};
        CHECK_THROWS_AS(s.add("c", bad), Error);
        const float shortv[2] = {1.0f, 2.0f};
        CHECK_THROWS_AS(s.add("d", shortv), Error);
        CHECK_THROWS_AS(s.add("a", a), Error);

        testing::write_text(dir / "bad.bin", "NOPE!");
        CHECK_THROWS_AS(read_embeddings(dir / "bad.bin"), Error);
        auto bytes = testing::read_text(dir / "e.bin");
        testing::write_text(dir / "trunc.bin", bytes.substr(0, bytes.size() - 2));
        CHECK_THROWS_AS(read_embeddings(dir / "trunc.bin"), Error);
    }
}
