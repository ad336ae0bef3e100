#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcnn/errors.hpp"

namespace mcnn {

enum class Source { IRD, GISAID, Other };

std::string source_name(Source s);
Source parse_source(const std::string& s);

/// One curated influenza strain.
struct StrainRecord {
    std::string strain_id;
    std::optional<std::string> ha_seq;
    std::optional<std::string> na_seq;
    std::string host_raw;
    std::string host_class;
    std::string ha_class;
    std::string na_class;
    std::optional<int> year;
    bool complete = false;
    Source source = Source::Other;
};

/// Host regrouping plus subtype merge targets; loaded from an editable
/// JSON file so the category set stays data, not code.
struct LabelSchema {
    std::vector<std::string> host_categories;
    std::unordered_map<std::string, std::string> host_map;  // raw (lowercased) -> category
    std::vector<std::string> ha_classes;
    std::vector<std::string> na_classes;
    std::unordered_map<std::string, std::string> ha_merge;  // e.g. H15 -> H_other
    std::unordered_map<std::string, std::string> na_merge;

    static LabelSchema from_json(const std::string& json_text);
    std::string to_json() const;

    std::optional<std::string> map_host(const std::string& raw) const;
    int host_index(const std::string& category) const;  // -1 when unknown
    int ha_index(const std::string& cls) const;
    int na_index(const std::string& cls) const;

    std::uint64_t content_hash() const;
};

// Uncurated row joined from the metadata TSV and the FASTA files.
struct RawRecord {
    std::string strain_id;
    Source source = Source::Other;
    std::string host_raw;
    std::string subtype;  // e.g. "H5N1"
    std::optional<int> year;
    bool complete = false;
    std::optional<std::string> ha_seq;
    std::optional<std::string> na_seq;
};

struct CurationLog {
    std::size_t kept = 0;
    std::map<std::string, std::size_t> dropped;  // reason -> count

    void drop(const std::string& reason) { ++dropped[reason]; }
};

std::vector<std::pair<std::string, std::string>> parse_fasta(const std::string& path);
std::vector<std::pair<std::string, std::string>> parse_fasta_text(
    const std::string& text, const std::string& origin);

// Metadata TSV: strain_id, source, host, subtype, year, completeness.
// Header row required.
std::vector<RawRecord> parse_metadata_tsv(const std::string& path);

// Joins FASTA sequences onto metadata rows by the first whitespace-separated
// header token.
void attach_sequences(std::vector<RawRecord>& records,
                      const std::vector<std::pair<std::string, std::string>>& fasta,
                      bool is_ha);

std::vector<StrainRecord> curate(const std::vector<RawRecord>& raw,
                                 const LabelSchema& schema, CurationLog& log);

struct EraSplit {
    std::vector<StrainRecord> pre20;
    std::vector<StrainRecord> post20;
    std::vector<StrainRecord> incomplete;
    std::vector<StrainRecord> quarantine;  // missing or out-of-range year
};

EraSplit split_by_era(const std::vector<StrainRecord>& records);

/// Outer test folds plus nested inner validation folds, all by record id.
struct FoldPlan {
    std::size_t k_outer = 5;
    std::size_t k_inner = 4;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::string>> outer_test;
    // inner_val[o][i] = validation ids of inner fold i within outer-train o
    std::vector<std::vector<std::vector<std::string>>> inner_val;
    std::vector<std::string> warnings;

    std::string to_json() const;
    static FoldPlan from_json(const std::string& json_text);
};

FoldPlan plan_nested_folds(const std::vector<StrainRecord>& records,
                           std::size_t k_outer, std::size_t k_inner,
                           std::uint64_t seed);

// Newline-delimited JSON persistence, one record per line, schema-versioned.
std::string record_to_json(const StrainRecord& r);
StrainRecord record_from_json(const std::string& line);
void save_dataset(const std::vector<StrainRecord>& records, const std::string& path);
std::vector<StrainRecord> load_dataset(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace mcnn
