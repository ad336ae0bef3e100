#include "mcnn/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcnn/tokenizer.hpp"

namespace mcnn {

TrigramCounts trigram_counts(const StrainRecord& r) {
    TrigramCounts counts;
    if (r.ha_seq && r.ha_seq->size() >= 3)
        for (auto& t : extract_ngrams(*r.ha_seq, 3)) counts["H:" + t] += 1.0;
    if (r.na_seq && r.na_seq->size() >= 3)
        for (auto& t : extract_ngrams(*r.na_seq, 3)) counts["N:" + t] += 1.0;
    return counts;
}

double cosine_similarity(const TrigramCounts& a, const TrigramCounts& b) {
    const TrigramCounts& small = a.size() <= b.size() ? a : b;
    const TrigramCounts& large = a.size() <= b.size() ? b : a;
    double dot = 0.0;
    for (const auto& [k, v] : small) {
        auto it = large.find(k);
        if (it != large.end()) dot += v * it->second;
    }
    if (dot == 0.0) return 0.0;
    double na = 0.0, nb = 0.0;
    for (const auto& [k, v] : a) na += v * v;
    for (const auto& [k, v] : b) nb += v * v;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

struct LabeledVectors {
    std::vector<TrigramCounts> vectors;
    std::vector<int> host, ha, na;
};

LabeledVectors vectorize(const std::vector<StrainRecord>& records,
                         const LabelSchema& schema) {
    LabeledVectors out;
    for (const auto& r : records) {
        out.vectors.push_back(trigram_counts(r));
        const int h = schema.host_index(r.host_class);
        const int a = schema.ha_index(r.ha_class);
        const int n = schema.na_index(r.na_class);
        if (h < 0 || a < 0 || n < 0)
            throw LabelError("record '" + r.strain_id + "' has labels outside the schema");
        out.host.push_back(h);
        out.ha.push_back(a);
        out.na.push_back(n);
    }
    return out;
}

EvalReport report_from_predictions(const std::vector<std::vector<double>>& host_p,
                                   const std::vector<std::vector<double>>& ha_p,
                                   const std::vector<std::vector<double>>& na_p,
                                   const std::vector<int>& host_t,
                                   const std::vector<int>& ha_t,
                                   const std::vector<int>& na_t,
                                   const LabelSchema& schema,
                                   const std::string& fold_tag) {
    EvalReport rep;
    rep.fold = fold_tag;
    rep.heads.push_back(one_vs_all_report("host", host_p, host_t, schema.host_categories));
    rep.heads.push_back(one_vs_all_report("ha_subtype", ha_p, ha_t, schema.ha_classes));
    rep.heads.push_back(one_vs_all_report("na_subtype", na_p, na_t, schema.na_classes));
    return rep;
}

std::vector<double> one_hot(std::size_t n, int idx) {
    std::vector<double> v(n, 0.0);
    v[static_cast<std::size_t>(idx)] = 1.0;
    return v;
}

}  // namespace

EvalReport knn_baseline(const std::vector<StrainRecord>& train,
                        const std::vector<StrainRecord>& test,
                        const LabelSchema& schema, const std::string& fold_tag,
                        std::size_t k) {
    if (train.empty()) throw ContractError("knn_baseline: empty training set");
    if (k < 1) throw ContractError("knn_baseline: k must be >= 1");
    LabeledVectors tr = vectorize(train, schema);
    LabeledVectors te = vectorize(test, schema);

    std::vector<std::vector<double>> host_p, ha_p, na_p;
    for (std::size_t q = 0; q < te.vectors.size(); ++q) {
        std::vector<std::pair<double, std::size_t>> sims;  // (-sim, index): stable order
        sims.reserve(tr.vectors.size());
        for (std::size_t t = 0; t < tr.vectors.size(); ++t)
            sims.emplace_back(-cosine_similarity(te.vectors[q], tr.vectors[t]), t);
        const std::size_t kk = std::min(k, sims.size());
        std::partial_sort(sims.begin(), sims.begin() + kk, sims.end());

        // similarity-weighted vote per head; k=1 reduces to nearest neighbor
        std::vector<double> vote_host(schema.host_categories.size(), 0.0);
        std::vector<double> vote_ha(schema.ha_classes.size(), 0.0);
        std::vector<double> vote_na(schema.na_classes.size(), 0.0);
        for (std::size_t i = 0; i < kk; ++i) {
            const double w = std::max(-sims[i].first, 1e-12);
            const std::size_t t = sims[i].second;
            vote_host[tr.host[t]] += w;
            vote_ha[tr.ha[t]] += w;
            vote_na[tr.na[t]] += w;
        }
        auto normalize = [](std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            if (s > 0)
                for (double& x : v) x /= s;
        };
        normalize(vote_host);
        normalize(vote_ha);
        normalize(vote_na);
        host_p.push_back(std::move(vote_host));
        ha_p.push_back(std::move(vote_ha));
        na_p.push_back(std::move(vote_na));
    }
    return report_from_predictions(host_p, ha_p, na_p, te.host, te.ha, te.na, schema,
                                   fold_tag);
}

EvalReport score_external_hits(const std::vector<StrainRecord>& train,
                               const std::vector<StrainRecord>& test,
                               const std::string& hits_tsv_text,
                               const LabelSchema& schema,
                               const std::string& fold_tag) {
    std::unordered_map<std::string, const StrainRecord*> train_by_id;
    for (const auto& r : train) train_by_id[r.strain_id] = &r;
    std::unordered_map<std::string, std::string> best_hit;  // query -> subject
    std::istringstream in(hits_tsv_text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("hits tsv line " + std::to_string(line_no) +
                            ": expected query_id<tab>subject_id");
        // keep the first hit per query (best-hit files are rank ordered)
        best_hit.emplace(line.substr(0, tab), line.substr(tab + 1));
    }

    std::vector<std::vector<double>> host_p, ha_p, na_p;
    std::vector<int> host_t, ha_t, na_t;
    std::vector<std::string> notes;
    for (const auto& r : test) {
        auto hit = best_hit.find(r.strain_id);
        const StrainRecord* subject = nullptr;
        if (hit != best_hit.end()) {
            auto it = train_by_id.find(hit->second);
            if (it != train_by_id.end()) subject = it->second;
        }
        if (!subject) {
            notes.push_back("query '" + r.strain_id + "' has no usable hit; excluded");
            continue;
        }
        host_p.push_back(one_hot(schema.host_categories.size(),
                                 schema.host_index(subject->host_class)));
        ha_p.push_back(one_hot(schema.ha_classes.size(), schema.ha_index(subject->ha_class)));
        na_p.push_back(one_hot(schema.na_classes.size(), schema.na_index(subject->na_class)));
        host_t.push_back(schema.host_index(r.host_class));
        ha_t.push_back(schema.ha_index(r.ha_class));
        na_t.push_back(schema.na_index(r.na_class));
    }
    EvalReport rep = report_from_predictions(host_p, ha_p, na_p, host_t, ha_t, na_t,
                                             schema, fold_tag);
    for (auto& h : rep.heads)
        h.notes.insert(h.notes.end(), notes.begin(), notes.end());
    return rep;
}

}  // namespace mcnn
