#include "doctest.h"
#include "mcnn/seq_data.hpp"
#include "support/synthetic.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

using namespace mcnn;

namespace {

LabelSchema tiny_schema() {
    return LabelSchema::from_json(R"({
        "host_categories": ["human", "avian", "swine"],
        "host_map": {"human": "human", "Homo sapiens": "human",
                     "chicken": "avian", "duck": "avian", "pig": "swine"},
        "ha_classes": ["H1", "H3", "H5", "H_other"],
        "na_classes": ["N1", "N2", "N_other"],
        "ha_merge": {"H15": "H_other", "H17": "H_other", "H18": "H_other"},
        "na_merge": {"N10": "N_other", "N11": "N_other"}
    })");
}

RawRecord make_raw(std::string id, Source src = Source::IRD,
                   std::string host = "human", std::string subtype = "H1N1",
                   std::optional<int> year = 2015, bool complete = true) {
    RawRecord r;
    r.strain_id = std::move(id);
    r.source = src;
    r.host_raw = std::move(host);
    r.subtype = std::move(subtype);
    r.year = year;
    r.complete = complete;
    r.ha_seq = "MKAILVVLLYTFATANADTLCIGYHANNSTDTVDTVLEKNVTV";
    r.na_seq = "MNPNQKIITIGSVCMTIGMANLILQIGNIISIWISHSIQLGNQ";
    return r;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("fasta parsing handles multi-line, CRLF and blank lines") {
    auto recs = parse_fasta_text(">a desc\nACDE\nFGHI\r\n\n>b\nKLMN\n", "mem");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].first == "a desc");
    CHECK(recs[0].second == "ACDEFGHI");
    CHECK(recs[1].second == "KLMN");
}

TEST_CASE("fasta parsing rejects malformed input with origin and line") {
    CHECK_THROWS_WITH_AS(parse_fasta_text(">a\n>b\nACDE\n", "f.fasta"),
                         doctest::Contains("f.fasta:1"), DataError);
    CHECK_THROWS_WITH_AS(parse_fasta_text("ACDE\n", "f.fasta"),
                         doctest::Contains("f.fasta:1"), DataError);
    CHECK_THROWS_WITH_AS(parse_fasta_text(">a\nACDE\n>b\n", "f.fasta"),
                         doctest::Contains("f.fasta:3"), DataError);
    CHECK(parse_fasta_text("", "f.fasta").empty());
}

TEST_CASE("metadata tsv parses fields and flags bad rows") {
    auto path = temp_path("mcnn_meta_test.tsv");
    write_file(path.string(),
               "strain_id\tsource\thost\tsubtype\tyear\tcompleteness\n"
               "s1\tIRD\thuman\tH1N1\t2019\t1\n"
               "s2\tGISAID\tchicken\tH5N1\t\tcomplete\n"
               "s3\tother\tpig\tH3N2\tNA\t0\n");
    auto rows = parse_metadata_tsv(path.string());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].source == Source::IRD);
    CHECK(rows[0].year == 2019);
    CHECK(rows[0].complete);
    CHECK_FALSE(rows[1].year.has_value());
    CHECK(rows[1].complete);
    CHECK_FALSE(rows[2].year.has_value());
    CHECK_FALSE(rows[2].complete);

    write_file(path.string(), "strain_id\tsource\thost\tsubtype\tyear\tcompleteness\n"
                              "s1\tIRD\thuman\tH1N1\n");
    CHECK_THROWS_WITH_AS(parse_metadata_tsv(path.string()),
                         doctest::Contains("expected 6 columns"), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("attach_sequences joins on the first header token") {
    std::vector<RawRecord> rows{make_raw("s1"), make_raw("s2")};
    rows[0].ha_seq.reset();
    rows[1].ha_seq.reset();
    attach_sequences(rows, {{"s1 A/strain/2015 segment 4", "ACDEF"}}, /*is_ha=*/true);
    CHECK(rows[0].ha_seq == "ACDEF");
    CHECK_FALSE(rows[1].ha_seq.has_value());
}

TEST_CASE("curation keeps a clean record intact") {
    CurationLog log;
    auto out = curate({make_raw("s1", Source::IRD, "Homo sapiens", "H5N1")},
                      tiny_schema(), log);
    REQUIRE(out.size() == 1);
    CHECK(out[0].host_class == "human");
    CHECK(out[0].ha_class == "H5");
    CHECK(out[0].na_class == "N1");
    CHECK(log.kept == 1);
    CHECK(log.dropped.empty());
}

TEST_CASE("curation prefers IRD copies over GISAID duplicates") {
    CurationLog log;
    auto gisaid = make_raw("s1", Source::GISAID, "chicken", "H5N1");
    auto ird = make_raw("s1", Source::IRD, "duck", "H5N2");
    auto out = curate({gisaid, ird}, tiny_schema(), log);
    REQUIRE(out.size() == 1);
    CHECK(out[0].host_raw == "duck");
    CHECK(out[0].na_class == "N2");
    CHECK(log.dropped.at("dedup-gisaid") == 1);
}

TEST_CASE("curation drops conflicting duplicate labels") {
    CurationLog log;
    auto a = make_raw("s1", Source::IRD, "human", "H1N1");
    auto b = make_raw("s1", Source::IRD, "human", "H3N2");
    auto out = curate({a, b}, tiny_schema(), log);
    CHECK(out.empty());
    CHECK(log.dropped.at("multi-label") == 1);
}

TEST_CASE("curation drop reasons") {
    CurationLog log;
    std::vector<RawRecord> raw;
    raw.push_back(make_raw("h0", Source::IRD, "human", "H0N0"));
    raw.push_back(make_raw("badsub", Source::IRD, "human", "mixed"));
    raw.push_back(make_raw("nohost", Source::IRD, "bearded seal", "H1N1"));
    raw.push_back(make_raw("noseq", Source::IRD));
    raw.back().ha_seq.reset();
    raw.back().na_seq.reset();
    raw.push_back(make_raw("badseq", Source::IRD));
    raw.back().ha_seq = "ACD7EF";
    raw.push_back(make_raw("unmerged", Source::IRD, "human", "H7N9"));
    auto out = curate(raw, tiny_schema(), log);
    CHECK(out.empty());
    CHECK(log.kept == 0);
    CHECK(log.dropped.at("h0n0") == 1);
    CHECK(log.dropped.at("bad-subtype") == 1);
    CHECK(log.dropped.at("unmapped-host") == 1);
    CHECK(log.dropped.at("no-sequence") == 1);
    CHECK(log.dropped.at("bad-sequence") == 1);
    CHECK(log.dropped.at("unknown-subtype-class") == 1);
}

TEST_CASE("curation applies subtype merges") {
    CurationLog log;
    auto out = curate({make_raw("s1", Source::IRD, "human", "H17N10")},
                      tiny_schema(), log);
    REQUIRE(out.size() == 1);
    CHECK(out[0].ha_class == "H_other");
    CHECK(out[0].na_class == "N_other");
}

TEST_CASE("curation is idempotent on already clean data") {
    CurationLog log1, log2;
    std::vector<RawRecord> raw{make_raw("s1"), make_raw("s2", Source::GISAID, "pig", "H3N2")};
    auto once = curate(raw, tiny_schema(), log1);
    // feed the curated output back through as raw rows
    std::vector<RawRecord> again;
    for (const auto& r : once) {
        RawRecord rr;
        rr.strain_id = r.strain_id;
        rr.source = r.source;
        rr.host_raw = r.host_raw;
        rr.subtype = r.ha_class + r.na_class;
        rr.year = r.year;
        rr.complete = r.complete;
        rr.ha_seq = r.ha_seq;
        rr.na_seq = r.na_seq;
        again.push_back(std::move(rr));
    }
    auto twice = curate(again, tiny_schema(), log2);
    REQUIRE(twice.size() == once.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(twice[i].strain_id == once[i].strain_id);
        CHECK(twice[i].ha_seq == once[i].ha_seq);
        CHECK(twice[i].host_class == once[i].host_class);
    }
    CHECK(log2.dropped.empty());
}

TEST_CASE("era split boundaries") {
    auto rec = [](std::optional<int> year, bool complete) {
        StrainRecord r;
        r.strain_id = "x";
        r.year = year;
        r.complete = complete;
        return r;
    };
    EraSplit s = split_by_era({rec(2019, true), rec(2020, true), rec(2022, true),
                               rec(2023, true), rec(std::nullopt, true), rec(2019, false)});
    CHECK(s.pre20.size() == 1);
    CHECK(s.post20.size() == 2);
    CHECK(s.quarantine.size() == 2);
    CHECK(s.incomplete.size() == 1);
}

TEST_CASE("label schema rejects host_map targets outside the category list") {
    CHECK_THROWS_WITH_AS(LabelSchema::from_json(R"({
        "host_categories": ["human"],
        "host_map": {"duck": "avian"},
        "ha_classes": ["H1"], "na_classes": ["N1"]
    })"),
                         doctest::Contains("avian"), DataError);
}

TEST_CASE("label schema host mapping is case and whitespace insensitive") {
    auto schema = tiny_schema();
    CHECK(schema.map_host("  HOMO SAPIENS ") == "human");
    CHECK_FALSE(schema.map_host("walrus").has_value());
    CHECK(schema.host_index("avian") == 1);
    CHECK(schema.host_index("walrus") == -1);
}

TEST_CASE("nested fold plan partitions outer folds without overlap") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 120, .n_hosts = 6});
    auto plan = plan_nested_folds(corpus.records, 5, 4, 42);
    REQUIRE(plan.outer_test.size() == 5);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& fold : plan.outer_test) {
        total += fold.size();
        // balanced within one element of 120/5
        CHECK(fold.size() >= 23);
        CHECK(fold.size() <= 25);
        for (const auto& id : fold) CHECK(seen.insert(id).second);
    }
    CHECK(total == corpus.records.size());
}

TEST_CASE("inner validation folds never touch the outer test fold") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 100, .n_hosts = 5});
    auto plan = plan_nested_folds(corpus.records, 5, 4, 7);
    for (std::size_t o = 0; o < plan.outer_test.size(); ++o) {
        std::set<std::string> test(plan.outer_test[o].begin(), plan.outer_test[o].end());
        std::set<std::string> inner_seen;
        std::size_t inner_total = 0;
        REQUIRE(plan.inner_val[o].size() == 4);
        for (const auto& fold : plan.inner_val[o]) {
            inner_total += fold.size();
            for (const auto& id : fold) {
                CHECK_FALSE(test.contains(id));
                CHECK(inner_seen.insert(id).second);
            }
        }
        // inner folds jointly cover all of outer-train
        CHECK(inner_total == corpus.records.size() - test.size());
    }
}

TEST_CASE("fold plans are stratified by host class when counts allow") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 100, .n_hosts = 4});
    auto plan = plan_nested_folds(corpus.records, 5, 4, 3);
    CHECK(plan.warnings.empty());
    std::unordered_map<std::string, std::string> host_of;
    for (const auto& r : corpus.records) host_of[r.strain_id] = r.host_class;
    for (const auto& fold : plan.outer_test) {
        std::map<std::string, std::size_t> counts;
        for (const auto& id : fold) ++counts[host_of[id]];
        for (const auto& [cls, c] : counts) CHECK(c == 5);  // 25 per class over 5 folds
    }
}

TEST_CASE("small classes are pooled with a warning") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 43, .n_hosts = 21});
    auto plan = plan_nested_folds(corpus.records, 5, 4, 3);
    CHECK_FALSE(plan.warnings.empty());
}

TEST_CASE("fold planning is deterministic in the seed") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 60, .n_hosts = 4});
    auto a = plan_nested_folds(corpus.records, 5, 4, 11);
    auto b = plan_nested_folds(corpus.records, 5, 4, 11);
    auto c = plan_nested_folds(corpus.records, 5, 4, 12);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.outer_test != c.outer_test);
}

TEST_CASE("fold plan json round trip") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 40, .n_hosts = 4});
    auto plan = plan_nested_folds(corpus.records, 5, 4, 99);
    auto loaded = FoldPlan::from_json(plan.to_json());
    CHECK(loaded.outer_test == plan.outer_test);
    CHECK(loaded.inner_val == plan.inner_val);
    CHECK(loaded.seed == plan.seed);
}

TEST_CASE("plan_nested_folds rejects corpora smaller than the fold grid") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 10, .n_hosts = 2});
    CHECK_THROWS_AS(plan_nested_folds(corpus.records, 5, 4, 0), ContractError);
}

TEST_CASE("dataset ndjson round trip preserves every field") {
    auto corpus = mcnn::testing::make_synthetic_corpus({.n_strains = 8, .n_hosts = 3});
    corpus.records[1].na_seq.reset();
    corpus.records[2].year.reset();
    auto path = temp_path("mcnn_dataset_test.ndjson");
    save_dataset(corpus.records, path.string());
    auto loaded = load_dataset(path.string());
    REQUIRE(loaded.size() == corpus.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].strain_id == corpus.records[i].strain_id);
        CHECK(loaded[i].ha_seq == corpus.records[i].ha_seq);
        CHECK(loaded[i].na_seq == corpus.records[i].na_seq);
        CHECK(loaded[i].host_class == corpus.records[i].host_class);
        CHECK(loaded[i].ha_class == corpus.records[i].ha_class);
        CHECK(loaded[i].na_class == corpus.records[i].na_class);
        CHECK(loaded[i].year == corpus.records[i].year);
        CHECK(loaded[i].complete == corpus.records[i].complete);
        CHECK(loaded[i].source == corpus.records[i].source);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(record_from_json(R"({"schema_version": 2})"), DataError);
}
