#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mcnn/metrics.hpp"
#include "mcnn/seq_data.hpp"

namespace mcnn {

// Sparse trigram count vector; HA and NA trigrams live in disjoint key
// spaces so a record's two proteins never collide.
using TrigramCounts = std::unordered_map<std::string, double>;

TrigramCounts trigram_counts(const StrainRecord& r);
double cosine_similarity(const TrigramCounts& a, const TrigramCounts& b);

// Alignment-free nearest-neighbor stand-in for a similarity-search baseline:
// each test record inherits the labels of its most similar training record
// (k > 1: similarity-weighted vote). Scored by the shared report pipeline.
EvalReport knn_baseline(const std::vector<StrainRecord>& train,
                        const std::vector<StrainRecord>& test,
                        const LabelSchema& schema, const std::string& fold_tag,
                        std::size_t k = 1);

// Scores externally produced best-hit pairs (query_id <tab> subject_id, one
// per line, no header) against training labels with the same pipeline.
// Queries without a hit are excluded and noted.
EvalReport score_external_hits(const std::vector<StrainRecord>& train,
                               const std::vector<StrainRecord>& test,
                               const std::string& hits_tsv_text,
                               const LabelSchema& schema,
                               const std::string& fold_tag);

}  // namespace mcnn
