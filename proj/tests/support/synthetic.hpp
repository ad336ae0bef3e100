#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcnn/rng.hpp"
#include "mcnn/seq_data.hpp"

namespace mcnn::testing {

// Corpus whose labels are determined by planted sequence motifs:
//   - HA subtype: one motif in the HA sequence
//   - NA subtype: one motif in the NA sequence
//   - host: a pair of motifs, one half in HA and one half in NA, so host
//     identity needs both channels
// motif_noise is the per-motif probability of replacement by random
// residues, which corrupts that label's signal for the strain. Noise draws
// come from streams derived per (strain, slot), so two corpora built with the
// same seed but different noise levels share backgrounds and motifs and
// differ only in the corrupted slots.
//
// background_pool > 0 assembles backgrounds from that many shared segments
// instead of fresh random residues; segment collisions between strains then
// dominate raw sequence similarity, which defeats nearest-neighbor lookup
// without touching the motif signal the models learn from.
struct SyntheticOptions {
    std::size_t n_strains = 50;
    std::size_t n_hosts = 25;
    std::size_t n_ha = 5;
    std::size_t n_na = 4;
    std::size_t background_len = 30;
    std::size_t motif_len = 6;
    double motif_noise = 0.0;
    std::size_t background_pool = 0;
    std::uint64_t seed = 1;
};

struct SyntheticCorpus {
    LabelSchema schema;
    std::vector<StrainRecord> records;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt);

}  // namespace mcnn::testing
