#include "mcnn/seq_data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mcnn/rng.hpp"
#include "mcnn/tokenizer.hpp"

namespace mcnn {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string first_token(const std::string& header) {
    std::size_t e = header.find_first_of(" \t");
    return e == std::string::npos ? header : header.substr(0, e);
}

}  // namespace

std::string source_name(Source s) {
    switch (s) {
        case Source::IRD: return "IRD";
        case Source::GISAID: return "GISAID";
        default: return "other";
    }
}

Source parse_source(const std::string& s) {
    const std::string l = lower(trim(s));
    if (l == "ird") return Source::IRD;
    if (l == "gisaid") return Source::GISAID;
    return Source::Other;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
}

// --- label schema ----------------------------------------------------------

LabelSchema LabelSchema::from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("label schema json: ") + e.what());
    }
    LabelSchema s;
    s.host_categories = j.at("host_categories").get<std::vector<std::string>>();
    for (auto& [k, v] : j.at("host_map").items())
        s.host_map[lower(k)] = v.get<std::string>();
    s.ha_classes = j.at("ha_classes").get<std::vector<std::string>>();
    s.na_classes = j.at("na_classes").get<std::vector<std::string>>();
    if (j.contains("ha_merge"))
        for (auto& [k, v] : j.at("ha_merge").items()) s.ha_merge[k] = v.get<std::string>();
    if (j.contains("na_merge"))
        for (auto& [k, v] : j.at("na_merge").items()) s.na_merge[k] = v.get<std::string>();
    for (auto& [raw, cat] : s.host_map)
        if (s.host_index(cat) < 0)
            throw DataError("label schema: host_map target '" + cat +
                            "' not in host_categories");
    return s;
}

std::string LabelSchema::to_json() const {
    nlohmann::json j;
    j["host_categories"] = host_categories;
    j["host_map"] = host_map;
    j["ha_classes"] = ha_classes;
    j["na_classes"] = na_classes;
    j["ha_merge"] = ha_merge;
    j["na_merge"] = na_merge;
    return j.dump(2);
}

std::optional<std::string> LabelSchema::map_host(const std::string& raw) const {
    auto it = host_map.find(lower(trim(raw)));
    if (it == host_map.end()) return std::nullopt;
    return it->second;
}

namespace {
int index_of(const std::vector<std::string>& v, const std::string& s) {
    auto it = std::find(v.begin(), v.end(), s);
    return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}
}  // namespace

int LabelSchema::host_index(const std::string& category) const {
    return index_of(host_categories, category);
}
int LabelSchema::ha_index(const std::string& cls) const {
    return index_of(ha_classes, cls);
}
int LabelSchema::na_index(const std::string& cls) const {
    return index_of(na_classes, cls);
}

std::uint64_t LabelSchema::content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    for (auto& c : host_categories) mix(c);
    for (auto& c : ha_classes) mix(c);
    for (auto& c : na_classes) mix(c);
    return h;
}

// --- FASTA ------------------------------------------------------------------

std::vector<std::pair<std::string, std::string>> parse_fasta_text(
    const std::string& text, const std::string& origin) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    std::string header;
    std::string seq;
    std::size_t line_no = 0;
    std::size_t header_line = 0;
    bool have_record = false;
    auto flush = [&]() {
        if (!have_record) return;
        if (seq.empty())
            throw DataError(origin + ":" + std::to_string(header_line) +
                            ": empty record \"" + header + "\"");
        out.emplace_back(header, seq);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            flush();
            header = line.substr(1);
            header_line = line_no;
            seq.clear();
            have_record = true;
        } else {
            if (!have_record)
                throw DataError(origin + ":" + std::to_string(line_no) +
                                ": sequence data before first header");
            seq += trim(line);
        }
    }
    flush();
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_fasta(const std::string& path) {
    return parse_fasta_text(read_file(path), path);
}

// --- metadata TSV ------------------------------------------------------------

std::vector<RawRecord> parse_metadata_tsv(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<RawRecord> out;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, '\t')) fields.push_back(f);
        if (fields.size() != 6)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 6 columns, got " +
                            std::to_string(fields.size()));
        if (!saw_header) {
            if (lower(trim(fields[0])) != "strain_id")
                throw DataError(path + ":1: header row required (strain_id\tsource\thost\tsubtype\tyear\tcompleteness)");
            saw_header = true;
            continue;
        }
        RawRecord r;
        r.strain_id = trim(fields[0]);
        r.source = parse_source(fields[1]);
        r.host_raw = trim(fields[2]);
        r.subtype = trim(fields[3]);
        const std::string y = trim(fields[4]);
        if (!y.empty() && lower(y) != "na") {
            try {
                r.year = std::stoi(y);
            } catch (...) {
                throw DataError(path + ":" + std::to_string(line_no) + ": bad year '" + y + "'");
            }
        }
        const std::string comp = lower(trim(fields[5]));
        r.complete = (comp == "1" || comp == "true" || comp == "complete" || comp == "yes");
        out.push_back(std::move(r));
    }
    if (!saw_header) throw DataError(path + ": empty metadata file");
    return out;
}

void attach_sequences(std::vector<RawRecord>& records,
                      const std::vector<std::pair<std::string, std::string>>& fasta,
                      bool is_ha) {
    std::unordered_map<std::string, const std::string*> by_id;
    for (auto& [header, seq] : fasta) by_id[first_token(header)] = &seq;
    for (auto& r : records) {
        auto it = by_id.find(r.strain_id);
        if (it == by_id.end()) continue;
        if (is_ha)
            r.ha_seq = *it->second;
        else
            r.na_seq = *it->second;
    }
}

// --- curation -----------------------------------------------------------------

namespace {

// "H5N1" -> ("H5", "N1"); merge map applied afterwards
bool parse_subtype(const std::string& s, std::string& ha, std::string& na) {
    std::size_t i = 0;
    if (i >= s.size() || std::toupper(static_cast<unsigned char>(s[i])) != 'H') return false;
    ++i;
    std::size_t hstart = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == hstart) return false;
    std::string hnum = s.substr(hstart, i - hstart);
    if (i >= s.size() || std::toupper(static_cast<unsigned char>(s[i])) != 'N') return false;
    ++i;
    std::size_t nstart = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == nstart || i != s.size()) return false;
    ha = "H" + std::to_string(std::stoi(hnum));
    na = "N" + std::to_string(std::stoi(s.substr(nstart)));
    return true;
}

bool same_metadata(const RawRecord& a, const RawRecord& b) {
    return a.host_raw == b.host_raw && a.subtype == b.subtype && a.year == b.year &&
           a.complete == b.complete;
}

}  // namespace

std::vector<StrainRecord> curate(const std::vector<RawRecord>& raw,
                                 const LabelSchema& schema, CurationLog& log) {
    // group by strain id, preserving first-seen order
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<const RawRecord*>> groups;
    for (const auto& r : raw) {
        auto [it, inserted] = groups.try_emplace(r.strain_id);
        if (inserted) order.push_back(r.strain_id);
        it->second.push_back(&r);
    }

    std::vector<StrainRecord> out;
    for (const auto& id : order) {
        auto& g = groups[id];
        // duplicates across sources resolve in favor of IRD
        std::vector<const RawRecord*> chosen;
        for (auto* r : g)
            if (r->source == Source::IRD) chosen.push_back(r);
        if (chosen.empty())
            chosen = g;
        else if (chosen.size() != g.size())
            log.drop("dedup-gisaid");
        bool conflict = false;
        for (std::size_t i = 1; i < chosen.size(); ++i)
            conflict = conflict || !same_metadata(*chosen[0], *chosen[i]);
        if (conflict) {
            log.drop("multi-label");
            continue;
        }
        const RawRecord& r = *chosen[0];

        std::string ha_cls, na_cls;
        if (!parse_subtype(r.subtype, ha_cls, na_cls)) {
            log.drop("bad-subtype");
            continue;
        }
        if (ha_cls == "H0" && na_cls == "N0") {
            log.drop("h0n0");
            continue;
        }
        if (auto it = schema.ha_merge.find(ha_cls); it != schema.ha_merge.end())
            ha_cls = it->second;
        if (auto it = schema.na_merge.find(na_cls); it != schema.na_merge.end())
            na_cls = it->second;
        if (schema.ha_index(ha_cls) < 0 || schema.na_index(na_cls) < 0) {
            log.drop("unknown-subtype-class");
            continue;
        }
        auto host = schema.map_host(r.host_raw);
        if (!host) {
            log.drop("unmapped-host");
            continue;
        }
        if (!r.ha_seq && !r.na_seq) {
            log.drop("no-sequence");
            continue;
        }

        StrainRecord s;
        s.strain_id = r.strain_id;
        s.source = r.source;
        s.host_raw = r.host_raw;
        s.host_class = *host;
        s.ha_class = ha_cls;
        s.na_class = na_cls;
        s.year = r.year;
        s.complete = r.complete;
        try {
            if (r.ha_seq) s.ha_seq = normalize_sequence(*r.ha_seq);
            if (r.na_seq) s.na_seq = normalize_sequence(*r.na_seq);
        } catch (const AlphabetError&) {
            log.drop("bad-sequence");
            continue;
        }
        ++log.kept;
        out.push_back(std::move(s));
    }
    return out;
}

EraSplit split_by_era(const std::vector<StrainRecord>& records) {
    EraSplit split;
    for (const auto& r : records) {
        if (!r.complete) {
            split.incomplete.push_back(r);
            continue;
        }
        if (!r.year) {
            split.quarantine.push_back(r);
            continue;
        }
        if (*r.year < 2020)
            split.pre20.push_back(r);
        else if (*r.year <= 2022)
            split.post20.push_back(r);
        else
            split.quarantine.push_back(r);
    }
    return split;
}

// --- nested fold plan ----------------------------------------------------------

namespace {

// Stratified deal: classes large enough are shuffled and dealt round-robin
// per class; the rest go into one shuffled pool.
std::vector<std::vector<std::size_t>> partition_stratified(
    const std::vector<std::size_t>& indices,
    const std::vector<const StrainRecord*>& records, std::size_t k, Rng& rng,
    std::vector<std::string>* warnings) {
    std::vector<std::string> class_order;
    std::unordered_map<std::string, std::vector<std::size_t>> by_class;
    for (auto idx : indices) {
        auto [it, inserted] = by_class.try_emplace(records[idx]->host_class);
        if (inserted) class_order.push_back(records[idx]->host_class);
        it->second.push_back(idx);
    }
    std::vector<std::vector<std::size_t>> folds(k);
    std::vector<std::size_t> pool;
    for (const auto& cls : class_order) {
        auto& members = by_class[cls];
        if (members.size() < k) {
            if (warnings)
                warnings->push_back("class '" + cls + "' has " +
                                    std::to_string(members.size()) +
                                    " members, fewer than k=" + std::to_string(k) +
                                    "; placed without stratification");
            pool.insert(pool.end(), members.begin(), members.end());
            continue;
        }
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[rng.next_below(i)]);
        for (std::size_t i = 0; i < members.size(); ++i)
            folds[i % k].push_back(members[i]);
    }
    for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[rng.next_below(i)]);
    // append pool entries to the currently smallest folds
    for (auto idx : pool) {
        std::size_t best = 0;
        for (std::size_t f = 1; f < k; ++f)
            if (folds[f].size() < folds[best].size()) best = f;
        folds[best].push_back(idx);
    }
    return folds;
}

}  // namespace

FoldPlan plan_nested_folds(const std::vector<StrainRecord>& records,
                           std::size_t k_outer, std::size_t k_inner,
                           std::uint64_t seed) {
    if (records.size() < k_outer * k_inner)
        throw ContractError("plan_nested_folds: need at least " +
                            std::to_string(k_outer * k_inner) + " records, got " +
                            std::to_string(records.size()));
    FoldPlan plan;
    plan.k_outer = k_outer;
    plan.k_inner = k_inner;
    plan.seed = seed;

    std::vector<const StrainRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(&r);
    std::vector<std::size_t> all(records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    Rng outer_rng(derive_seed(seed, "fold-plan/outer"));
    auto outer = partition_stratified(all, ptrs, k_outer, outer_rng, &plan.warnings);
    for (std::size_t o = 0; o < k_outer; ++o) {
        std::vector<std::string> test_ids;
        for (auto idx : outer[o]) test_ids.push_back(records[idx].strain_id);
        plan.outer_test.push_back(std::move(test_ids));

        std::vector<std::size_t> train;
        for (std::size_t f = 0; f < k_outer; ++f)
            if (f != o) train.insert(train.end(), outer[f].begin(), outer[f].end());
        Rng inner_rng(derive_seed(seed, "fold-plan/inner/" + std::to_string(o)));
        auto inner = partition_stratified(train, ptrs, k_inner, inner_rng, nullptr);
        std::vector<std::vector<std::string>> inner_ids;
        for (auto& fold : inner) {
            std::vector<std::string> ids;
            for (auto idx : fold) ids.push_back(records[idx].strain_id);
            inner_ids.push_back(std::move(ids));
        }
        plan.inner_val.push_back(std::move(inner_ids));
    }
    return plan;
}

std::string FoldPlan::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["k_outer"] = k_outer;
    j["k_inner"] = k_inner;
    j["seed"] = seed;
    j["outer_test"] = outer_test;
    j["inner_val"] = inner_val;
    j["warnings"] = warnings;
    return j.dump(2);
}

FoldPlan FoldPlan::from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("fold plan json: ") + e.what());
    }
    FoldPlan p;
    p.k_outer = j.at("k_outer").get<std::size_t>();
    p.k_inner = j.at("k_inner").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.outer_test = j.at("outer_test").get<std::vector<std::vector<std::string>>>();
    p.inner_val =
        j.at("inner_val").get<std::vector<std::vector<std::vector<std::string>>>>();
    if (j.contains("warnings"))
        p.warnings = j.at("warnings").get<std::vector<std::string>>();
    return p;
}

// --- dataset persistence ---------------------------------------------------------

std::string record_to_json(const StrainRecord& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["strain_id"] = r.strain_id;
    if (r.ha_seq) j["ha_seq"] = *r.ha_seq;
    if (r.na_seq) j["na_seq"] = *r.na_seq;
    j["host_raw"] = r.host_raw;
    j["host_class"] = r.host_class;
    j["ha_class"] = r.ha_class;
    j["na_class"] = r.na_class;
    if (r.year) j["year"] = *r.year;
    j["complete"] = r.complete;
    j["source"] = source_name(r.source);
    return j.dump();
}

StrainRecord record_from_json(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("dataset record: ") + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw DataError("dataset record: unsupported schema version");
    StrainRecord r;
    r.strain_id = j.at("strain_id").get<std::string>();
    if (j.contains("ha_seq")) r.ha_seq = j["ha_seq"].get<std::string>();
    if (j.contains("na_seq")) r.na_seq = j["na_seq"].get<std::string>();
    r.host_raw = j.value("host_raw", "");
    r.host_class = j.at("host_class").get<std::string>();
    r.ha_class = j.at("ha_class").get<std::string>();
    r.na_class = j.at("na_class").get<std::string>();
    if (j.contains("year")) r.year = j["year"].get<int>();
    r.complete = j.value("complete", false);
    r.source = parse_source(j.value("source", "other"));
    return r;
}

void save_dataset(const std::vector<StrainRecord>& records, const std::string& path) {
    std::ostringstream os;
    for (const auto& r : records) os << record_to_json(r) << "\n";
    write_file(path, os.str());
}

std::vector<StrainRecord> load_dataset(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<StrainRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(record_from_json(line));
    }
    return out;
}

}  // namespace mcnn
