#include "doctest.h"
#include "mcnn/baseline.hpp"
#include "support/synthetic.hpp"

using namespace mcnn;
using mcnn::testing::make_synthetic_corpus;

namespace {

StrainRecord rec(std::string id, std::string ha, std::string na,
                 std::string host = "h0", std::string ha_cls = "H1",
                 std::string na_cls = "N1") {
    StrainRecord r;
    r.strain_id = std::move(id);
    if (!ha.empty()) r.ha_seq = std::move(ha);
    if (!na.empty()) r.na_seq = std::move(na);
    r.host_class = std::move(host);
    r.ha_class = std::move(ha_cls);
    r.na_class = std::move(na_cls);
    return r;
}

LabelSchema two_class_schema() {
    return LabelSchema::from_json(R"({
        "host_categories": ["h0", "h1"],
        "host_map": {"h0": "h0", "h1": "h1"},
        "ha_classes": ["H1", "H2"], "na_classes": ["N1", "N2"]
    })");
}

}  // namespace

TEST_CASE("trigram counts keep HA and NA in disjoint key spaces") {
    auto counts = trigram_counts(rec("s", "AAAA", "AAAA"));
    // AAA appears twice in each protein but the keys never merge
    CHECK(counts.size() == 2);
    double total = 0;
    for (auto& [k, v] : counts) {
        CHECK(v == 2.0);
        total += v;
    }
    CHECK(total == 4.0);
}

TEST_CASE("cosine similarity identities") {
    auto a = trigram_counts(rec("a", "ACDEFG", ""));
    auto b = trigram_counts(rec("b", "ACDEFG", ""));
    auto c = trigram_counts(rec("c", "KLMNPQ", ""));
    CHECK(cosine_similarity(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(a, c) == 0.0);  // disjoint trigrams
    CHECK(cosine_similarity({}, a) == 0.0);
    double ac = cosine_similarity(a, c);
    double sym1 = cosine_similarity(a, b), sym2 = cosine_similarity(b, a);
    CHECK(sym1 == sym2);
    CHECK(ac >= 0.0);
}

TEST_CASE("an identical test record inherits the training labels exactly") {
    std::vector<StrainRecord> train{
        rec("t1", "ACDEFGHIKL", "MNPQRSTVWY", "h0", "H1", "N1"),
        rec("t2", "WYVTSRQPNM", "LKIHGFEDCA", "h1", "H2", "N2")};
    std::vector<StrainRecord> test{
        rec("q1", "ACDEFGHIKL", "MNPQRSTVWY", "h0", "H1", "N1")};
    auto rep = knn_baseline(train, test, two_class_schema(), "b", 1);
    CHECK(mean_macro_f1(rep) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("1-nn baseline solves a noiseless motif corpus") {
    auto corpus = make_synthetic_corpus(
        {.n_strains = 80, .n_hosts = 4, .n_ha = 3, .n_na = 2, .background_len = 24});
    std::vector<StrainRecord> train(corpus.records.begin(), corpus.records.begin() + 60);
    std::vector<StrainRecord> test(corpus.records.begin() + 60, corpus.records.end());
    auto rep = knn_baseline(train, test, corpus.schema, "b", 1);
    // every label combination in the test slice also occurs in training with
    // matching motifs, so nearest neighbors dominate the random background
    CHECK(mean_macro_f1(rep) > 0.95);
}

TEST_CASE("k=3 vote with two agreeing close neighbors beats one distant one") {
    std::vector<StrainRecord> train{
        rec("t1", "AAACCCGGG", "", "h0", "H1", "N1"),
        rec("t2", "AAACCCGGT", "", "h0", "H1", "N1"),
        rec("t3", "TTTSSSPPP", "", "h1", "H2", "N2")};
    std::vector<StrainRecord> test{rec("q", "AAACCCGGG", "", "h0", "H1", "N1")};
    auto rep = knn_baseline(train, test, two_class_schema(), "b", 3);
    CHECK(mean_macro_f1(rep) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("baseline handles single-channel records") {
    std::vector<StrainRecord> train{rec("t1", "ACDEFGHIKL", "", "h0", "H1", "N1"),
                                    rec("t2", "", "MNPQRSTVWY", "h1", "H2", "N2")};
    std::vector<StrainRecord> test{rec("q1", "ACDEFGHIKL", "", "h0", "H1", "N1")};
    auto rep = knn_baseline(train, test, two_class_schema(), "b", 1);
    CHECK(mean_macro_f1(rep) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("external best-hit scoring matches labels through the hit table") {
    std::vector<StrainRecord> train{
        rec("t1", "ACDEFGHIKL", "MNPQRSTVWY", "h0", "H1", "N1"),
        rec("t2", "WYVTSRQPNM", "LKIHGFEDCA", "h1", "H2", "N2")};
    std::vector<StrainRecord> test{
        rec("q1", "ACDEFGHIKL", "MNPQRSTVWY", "h0", "H1", "N1"),
        rec("q2", "WYVTSRQPNM", "LKIHGFEDCA", "h1", "H2", "N2"),
        rec("q3", "ACDACDACDA", "ACDACDACDA", "h0", "H1", "N1")};
    // q3 has no hit: excluded from scoring and noted
    auto rep = score_external_hits(train, test, "q1\tt1\nq2\tt2\n",
                                   two_class_schema(), "ext");
    CHECK(mean_macro_f1(rep) == doctest::Approx(1.0).epsilon(1e-12));
    bool noted = false;
    for (const auto& h : rep.heads)
        for (const auto& n : h.notes) noted = noted || n.find("q3") != std::string::npos;
    CHECK(noted);
}

TEST_CASE("external hits naming unknown subjects are excluded, malformed lines rejected") {
    std::vector<StrainRecord> train{rec("t1", "ACDEFGHIKL", "", "h0", "H1", "N1")};
    std::vector<StrainRecord> test{rec("q1", "ACDEFGHIKL", "", "h0", "H1", "N1")};
    auto rep = score_external_hits(train, test, "q1\tnosuch\n", two_class_schema(), "ext");
    bool noted = false;
    for (const auto& h : rep.heads)
        for (const auto& n : h.notes) noted = noted || n.find("q1") != std::string::npos;
    CHECK(noted);
    CHECK_THROWS_AS(score_external_hits(train, test, "q1 no tab here\n",
                                        two_class_schema(), "ext"),
                    DataError);
}
