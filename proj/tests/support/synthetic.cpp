#include "synthetic.hpp"

#include <cmath>

namespace mcnn::testing {

namespace {

constexpr char kResidues[] = "ACDEFGHIKLMNPQRSTVWY";

std::string random_residues(Rng& rng, std::size_t len) {
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i)
        s.push_back(kResidues[rng.next_below(20)]);
    return s;
}

std::vector<std::string> make_motifs(Rng& rng, std::size_t count, std::size_t len) {
    std::vector<std::string> motifs;
    while (motifs.size() < count) {
        std::string m = random_residues(rng, len);
        bool dup = false;
        for (const auto& other : motifs) dup = dup || other == m;
        if (!dup) motifs.push_back(std::move(m));
    }
    return motifs;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt) {
    Rng rng(derive_seed(opt.seed, "synthetic-corpus"));
    SyntheticCorpus out;

    for (std::size_t h = 0; h < opt.n_hosts; ++h) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "host%02zu", h);
        out.schema.host_categories.push_back(buf);
        out.schema.host_map[buf] = buf;
    }
    for (std::size_t a = 0; a < opt.n_ha; ++a)
        out.schema.ha_classes.push_back("H" + std::to_string(a + 1));
    for (std::size_t n = 0; n < opt.n_na; ++n)
        out.schema.na_classes.push_back("N" + std::to_string(n + 1));

    // host identity is the pair (half1, half2); half1 planted in HA, half2 in NA
    const std::size_t n_half2 =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(opt.n_hosts))));
    const std::size_t n_half1 = (opt.n_hosts + n_half2 - 1) / n_half2;
    auto host_half1 = make_motifs(rng, n_half1, opt.motif_len);
    auto host_half2 = make_motifs(rng, n_half2, opt.motif_len);
    auto ha_motifs = make_motifs(rng, opt.n_ha, opt.motif_len);
    auto na_motifs = make_motifs(rng, opt.n_na, opt.motif_len);

    const std::size_t third = opt.background_len / 3;
    const std::size_t rest = opt.background_len - 2 * third;
    std::vector<std::string> pool_third, pool_rest;
    if (opt.background_pool > 0 && third > 0) {
        pool_third = make_motifs(rng, opt.background_pool, third);
        pool_rest = make_motifs(rng, opt.background_pool, rest);
    }
    auto background = [&](std::size_t len) {
        if (opt.background_pool == 0 || len == 0) return random_residues(rng, len);
        const auto& pool = len == third ? pool_third : pool_rest;
        return pool[rng.next_below(pool.size())];
    };

    // Noise draws live on streams derived per (strain, slot): corpora with the
    // same seed but different noise share every background and clean motif.
    auto maybe_noised = [&](const std::string& motif, const std::string& id,
                            const char* slot) {
        if (opt.motif_noise <= 0.0) return motif;
        Rng noise_rng(derive_seed(opt.seed, "noise/" + id + "/" + slot));
        if (noise_rng.next_double() < opt.motif_noise)
            return random_residues(noise_rng, motif.size());
        return motif;
    };

    for (std::size_t i = 0; i < opt.n_strains; ++i) {
        const std::size_t host = i % opt.n_hosts;
        // subtype labels are decorrelated from the host label: strains sharing
        // a host do not automatically share subtypes
        const std::size_t j = i + i / opt.n_hosts;
        const std::size_t ha = j % opt.n_ha;
        const std::size_t na = j % opt.n_na;
        StrainRecord r;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "strain%05zu", i);
        r.strain_id = buf;
        r.host_raw = out.schema.host_categories[host];
        r.host_class = r.host_raw;
        r.ha_class = out.schema.ha_classes[ha];
        r.na_class = out.schema.na_classes[na];
        r.year = 2015;
        r.complete = true;
        r.source = Source::IRD;
        r.ha_seq = background(third) +
                   maybe_noised(host_half1[host / n_half2], r.strain_id, "ha-host") +
                   background(third) +
                   maybe_noised(ha_motifs[ha], r.strain_id, "ha-sub") +
                   background(rest);
        r.na_seq = background(third) +
                   maybe_noised(host_half2[host % n_half2], r.strain_id, "na-host") +
                   background(third) +
                   maybe_noised(na_motifs[na], r.strain_id, "na-sub") +
                   background(rest);
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace mcnn::testing
