// mcnn: batch command-line surface for the multi-channel influenza model.
//
// Subcommands: ingest, train, nested-cv, evaluate, predict, baseline.
// Exit codes: 0 success, 2 data error, 3 config error, 4 checkpoint error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "CLI11.hpp"
#include "mcnn/baseline.hpp"
#include "mcnn/model.hpp"
#include "mcnn/rng.hpp"
#include "mcnn/train.hpp"

namespace fs = std::filesystem;
using namespace mcnn;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kDatasetSchemaVersion = 1;
constexpr int kCheckpointVersion = 1;

// ---------------------------------------------------------------- options ---

struct ModelOpts {
    std::string variant = "cnn";
    McnnConfig cfg;

    void attach(CLI::App* cmd) {
        cmd->add_option("--variant", variant, "Encoder variant: cnn, bigru, transformer")
            ->check(CLI::IsMember({"cnn", "bigru", "transformer"}));
        cmd->add_option("--embedding-size", cfg.embedding_size, "Trigram embedding width");
        cmd->add_option("--kernel-size", cfg.kernel_size, "CNN kernel length");
        cmd->add_option("--num-heads", cfg.num_heads, "Transformer attention heads");
        cmd->add_option("--filters", cfg.filters, "CNN filter count");
        cmd->add_option("--hidden-dim", cfg.hidden_dim, "GRU hidden width");
        cmd->add_option("--ff-dim", cfg.ff_dim, "Transformer feed-forward width");
        cmd->add_option("--depth", cfg.depth, "Transformer blocks per channel");
        cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
        cmd->add_option("--max-len-ha", cfg.max_len_ha, "HA trigram window cap");
        cmd->add_option("--max-len-na", cfg.max_len_na, "NA trigram window cap");
    }

    McnnConfig build(std::uint64_t seed) const {
        McnnConfig c = cfg;
        c.variant = parse_variant(variant);
        c.seed = seed;
        c.validate();
        return c;
    }
};

struct TrainOpts {
    TrainOptions opt;

    void attach(CLI::App* cmd) {
        cmd->add_option("--batch-size", opt.batch_size, "Minibatch size");
        cmd->add_option("--max-epochs", opt.max_epochs, "Epoch cap");
        cmd->add_option("--patience", opt.patience, "Early-stopping patience");
    }
};

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir);
}

LabelSchema load_schema(const std::string& path) {
    return LabelSchema::from_json(read_file(path));
}

// ------------------------------------------------------------------ ingest ---

int cmd_ingest(const std::vector<std::string>& ha_paths,
               const std::vector<std::string>& na_paths,
               const std::string& metadata_path, const std::string& schema_path,
               const std::string& out_path) {
    LabelSchema schema = load_schema(schema_path);
    auto rows = parse_metadata_tsv(metadata_path);
    for (const auto& p : ha_paths) attach_sequences(rows, parse_fasta(p), true);
    for (const auto& p : na_paths) attach_sequences(rows, parse_fasta(p), false);

    CurationLog log;
    auto records = curate(rows, schema, log);
    save_dataset(records, out_path);

    std::printf("kept:%zu\n", log.kept);
    for (const auto& [reason, count] : log.dropped)
        std::printf("%s:%zu\n", reason.c_str(), count);
    std::printf("wrote %zu records to %s\n", records.size(), out_path.c_str());
    return 0;
}

// ------------------------------------------------------------------- train ---

int cmd_train(const std::string& data_path, const std::string& schema_path,
              const std::string& out_dir, const ModelOpts& mopts,
              const TrainOpts& topts, std::uint64_t seed, double val_fraction) {
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("--val-fraction must lie in [0, 1)");
    McnnConfig cfg = mopts.build(seed);
    LabelSchema schema = load_schema(schema_path);
    auto records = load_dataset(data_path);
    if (records.empty()) throw DataError("dataset is empty: " + data_path);
    ensure_out_dir(out_dir);

    // deterministic validation carve-out
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "cli/val-split"));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);
    const std::size_t n_val =
        static_cast<std::size_t>(val_fraction * static_cast<double>(records.size()));
    std::vector<StrainRecord> train_recs, val_recs;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val_recs : train_recs).push_back(records[order[i]]);

    Tokenized tok = build_vocabs(train_recs);
    McnnModel model = McnnModel::create(cfg, tok.vocab_ha, tok.vocab_na,
                                        schema.host_categories, schema.ha_classes,
                                        schema.na_classes);
    auto train_set = make_samples(train_recs, tok, cfg, schema);
    auto val_set = make_samples(val_recs, tok, cfg, schema);

    TrainOptions opt = topts.opt;
    opt.verbose = true;
    History hist = train(model, train_set, val_set, opt);

    const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
    save_model(model, ckpt);
    write_file((fs::path(out_dir) / "history.json").string(), hist.to_json());
    std::printf("checkpoint: %s\n", ckpt.c_str());
    return 0;
}

// --------------------------------------------------------------- nested cv ---

int cmd_nested_cv(const std::string& data_path, const std::string& schema_path,
                  const std::string& out_dir, const ModelOpts& mopts,
                  const TrainOpts& topts, std::uint64_t seed, std::size_t k_outer,
                  std::size_t k_inner, std::size_t jobs) {
    McnnConfig base = mopts.build(seed);
    LabelSchema schema = load_schema(schema_path);
    auto records = load_dataset(data_path);
    ensure_out_dir(out_dir);

    HyperGrid grid = HyperGrid::paper_grid(base.variant);
    TrainOptions opt = topts.opt;
    NestedCvResult result =
        nested_cv(records, schema, base, grid, k_outer, k_inner, seed, opt, jobs);

    write_file((fs::path(out_dir) / "fold_plan.json").string(), result.plan.to_json());
    for (const auto& f : result.folds) {
        const std::string stem = "outer-" + std::to_string(f.fold_index);
        write_file((fs::path(out_dir) / (stem + ".json")).string(), f.report.to_json());
        write_file((fs::path(out_dir) / (stem + "_pr_curves.csv")).string(),
                   f.report.pr_curves_csv());
    }
    write_file((fs::path(out_dir) / "summary.json").string(), result.summary_json());
    std::printf("nested cv complete: %zu outer folds, summary in %s\n",
                result.folds.size(), out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------- evaluate ---

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& schema_path, const std::string& out_dir,
                 bool ha_only, bool na_only) {
    if (ha_only && na_only)
        throw ConfigError("--ha-only and --na-only are mutually exclusive");
    McnnModel model = load_model(ckpt_path);
    LabelSchema schema = load_schema(schema_path);
    auto records = load_dataset(data_path);
    ensure_out_dir(out_dir);

    Tokenized tok{model.vocab_ha, model.vocab_na};
    auto samples = make_samples(records, tok, model.config, schema);
    std::string tag = ha_only ? "ha-only" : na_only ? "na-only" : "both";
    EvalReport rep = evaluate_model(model, samples, tag, /*mask_ha=*/na_only,
                                    /*mask_na=*/ha_only);
    write_file((fs::path(out_dir) / "report.json").string(), rep.to_json());
    write_file((fs::path(out_dir) / "pr_curves.csv").string(), rep.pr_curves_csv());
    std::printf("evaluated %zu records (%s); mean macro-F1 %.4f\n", samples.size(),
                tag.c_str(), mean_macro_f1(rep));
    return 0;
}

// ----------------------------------------------------------------- predict ---

int cmd_predict(const std::string& ckpt_path, const std::string& ha_path,
                const std::string& na_path, const std::string& out_path) {
    if (ha_path.empty() && na_path.empty())
        throw ConfigError("predict needs --ha and/or --na FASTA input");
    // load the checkpoint before touching the output: a corrupt file must
    // leave no partial TSV behind
    McnnModel model = load_model(ckpt_path);

    auto first_token = [](const std::string& header) {
        std::size_t e = header.find_first_of(" \t");
        return e == std::string::npos ? header : header.substr(0, e);
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::pair<std::string, std::string>> seqs;
    auto ingest_fasta = [&](const std::string& path, bool is_ha) {
        if (path.empty()) return;
        for (auto& [header, seq] : parse_fasta(path)) {
            const std::string id = first_token(header);
            auto [it, inserted] = seqs.try_emplace(id);
            if (inserted) order.push_back(id);
            (is_ha ? it->second.first : it->second.second) = seq;
        }
    };
    ingest_fasta(ha_path, true);
    ingest_fasta(na_path, false);

    std::ostringstream os;
    os << "strain_id\thost\tha_subtype\tna_subtype\thost_conf\tha_conf\tna_conf\n";
    for (const auto& id : order) {
        const auto& [ha_seq, na_seq] = seqs[id];
        std::optional<std::vector<int>> ha_ids, na_ids;
        if (!ha_seq.empty())
            ha_ids = model.vocab_ha.encode(extract_ngrams(normalize_sequence(ha_seq), 3),
                                           model.config.max_len_ha);
        if (!na_seq.empty())
            na_ids = model.vocab_na.encode(extract_ngrams(normalize_sequence(na_seq), 3),
                                           model.config.max_len_na);
        Prediction p = predict(model, ha_ids ? &*ha_ids : nullptr,
                               na_ids ? &*na_ids : nullptr);
        char buf[64];
        os << id << '\t' << model.host_classes[p.host_idx] << '\t'
           << model.ha_classes[p.ha_idx] << '\t' << model.na_classes[p.na_idx];
        std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\t%.6f\n", p.host_conf, p.ha_conf,
                      p.na_conf);
        os << buf;
    }
    if (out_path.empty() || out_path == "-")
        std::cout << os.str();
    else
        write_file(out_path, os.str());
    return 0;
}

// ---------------------------------------------------------------- baseline ---

int cmd_baseline(const std::string& data_path, const std::string& schema_path,
                 const std::string& out_dir, std::uint64_t seed, std::size_t k_outer,
                 std::size_t k_inner, std::size_t k_neighbors) {
    LabelSchema schema = load_schema(schema_path);
    auto records = load_dataset(data_path);
    ensure_out_dir(out_dir);

    // the same fold plan the models use, so curves are comparable
    FoldPlan plan = plan_nested_folds(records, k_outer, k_inner, seed);
    std::unordered_set<std::string> ids;
    double mean_f1 = 0;
    for (std::size_t o = 0; o < plan.outer_test.size(); ++o) {
        ids.clear();
        ids.insert(plan.outer_test[o].begin(), plan.outer_test[o].end());
        std::vector<StrainRecord> train_recs, test_recs;
        for (const auto& r : records)
            (ids.contains(r.strain_id) ? test_recs : train_recs).push_back(r);
        EvalReport rep = knn_baseline(train_recs, test_recs, schema,
                                      "baseline-outer-" + std::to_string(o), k_neighbors);
        mean_f1 += mean_macro_f1(rep);
        write_file((fs::path(out_dir) / ("baseline-outer-" + std::to_string(o) + ".json"))
                       .string(),
                   rep.to_json());
    }
    mean_f1 /= static_cast<double>(plan.outer_test.size());
    std::printf("baseline mean macro-F1 over %zu folds: %.4f\n", plan.outer_test.size(),
                mean_f1);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcnn: multi-channel neural network for influenza A host and "
                 "subtype prediction"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML-style config file; flags mirror keys 1:1");
    app.allow_config_extras(false);
    app.set_version_flag("--version",
                         std::string("mcnn ") + kToolVersion + " (dataset schema v" +
                             std::to_string(kDatasetSchemaVersion) + ", checkpoint v" +
                             std::to_string(kCheckpointVersion) + ")");

    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    app.add_option("--seed", seed, "Base seed; all randomness derives from it")
        ->capture_default_str();
    app.add_option("--jobs", jobs, "Concurrent grid-search trials")
        ->capture_default_str();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Curate FASTA + metadata into a dataset");
    std::vector<std::string> ha_paths, na_paths;
    std::string metadata_path, schema_path, out_path, data_path, out_dir, ckpt_path;
    ingest->add_option("--ha", ha_paths, "HA FASTA file(s)");
    ingest->add_option("--na", na_paths, "NA FASTA file(s)");
    ingest->add_option("--metadata", metadata_path, "Metadata TSV")->required();
    ingest->add_option("--schema", schema_path, "Label schema JSON")->required();
    ingest->add_option("--out", out_path, "Output dataset (ndjson)")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one model, write a checkpoint");
    ModelOpts mopts;
    TrainOpts topts;
    double val_fraction = 0.1;
    train_cmd->add_option("--data", data_path, "Curated dataset (ndjson)")->required();
    train_cmd->add_option("--schema", schema_path, "Label schema JSON")->required();
    train_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
    train_cmd->add_option("--val-fraction", val_fraction,
                          "Held-out fraction for early stopping")
        ->capture_default_str();
    mopts.attach(train_cmd);
    topts.attach(train_cmd);

    // nested-cv
    auto* cv_cmd = app.add_subcommand("nested-cv",
                                      "Nested cross-validation over the paper grid");
    std::size_t k_outer = 5, k_inner = 4;
    cv_cmd->add_option("--data", data_path, "Curated dataset (ndjson)")->required();
    cv_cmd->add_option("--schema", schema_path, "Label schema JSON")->required();
    cv_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
    cv_cmd->add_option("--k-outer", k_outer, "Outer folds")->capture_default_str();
    cv_cmd->add_option("--k-inner", k_inner, "Inner folds")->capture_default_str();
    mopts.attach(cv_cmd);
    topts.attach(cv_cmd);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
    bool ha_only = false, na_only = false;
    eval_cmd->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
    eval_cmd->add_option("--data", data_path, "Curated dataset (ndjson)")->required();
    eval_cmd->add_option("--schema", schema_path, "Label schema JSON")->required();
    eval_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
    eval_cmd->add_flag("--ha-only", ha_only, "Mask the NA channel at inference");
    eval_cmd->add_flag("--na-only", na_only, "Mask the HA channel at inference");

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "Predict labels for FASTA input");
    std::string pred_ha, pred_na, pred_out;
    pred_cmd->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
    pred_cmd->add_option("--ha", pred_ha, "HA FASTA");
    pred_cmd->add_option("--na", pred_na, "NA FASTA");
    pred_cmd->add_option("--out", pred_out, "Output TSV ('-' for stdout)");

    // baseline
    auto* base_cmd = app.add_subcommand("baseline",
                                        "1-NN trigram-cosine baseline under the model "
                                        "fold plan");
    std::size_t k_neighbors = 1;
    base_cmd->add_option("--data", data_path, "Curated dataset (ndjson)")->required();
    base_cmd->add_option("--schema", schema_path, "Label schema JSON")->required();
    base_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
    base_cmd->add_option("--k-outer", k_outer, "Outer folds")->capture_default_str();
    base_cmd->add_option("--k-inner", k_inner, "Inner folds (plan compatibility)")
        ->capture_default_str();
    base_cmd->add_option("--k", k_neighbors, "Neighbors in the vote")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;  // bad flags/config are configuration errors
    }

    try {
        if (app.got_subcommand(ingest))
            return cmd_ingest(ha_paths, na_paths, metadata_path, schema_path, out_path);
        if (app.got_subcommand(train_cmd))
            return cmd_train(data_path, schema_path, out_dir, mopts, topts, seed,
                             val_fraction);
        if (app.got_subcommand(cv_cmd))
            return cmd_nested_cv(data_path, schema_path, out_dir, mopts, topts, seed,
                                 k_outer, k_inner, jobs);
        if (app.got_subcommand(eval_cmd))
            return cmd_evaluate(ckpt_path, data_path, schema_path, out_dir, ha_only,
                                na_only);
        if (app.got_subcommand(pred_cmd))
            return cmd_predict(ckpt_path, pred_ha, pred_na, pred_out);
        if (app.got_subcommand(base_cmd))
            return cmd_baseline(data_path, schema_path, out_dir, seed, k_outer, k_inner,
                                k_neighbors);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 4;
    } catch (const std::runtime_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
