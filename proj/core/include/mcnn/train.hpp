#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcnn/metrics.hpp"
#include "mcnn/model.hpp"
#include "mcnn/seq_data.hpp"

namespace mcnn {

struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t t = 0;
    std::vector<std::vector<double>> m, v;

    static AdamState init(const std::vector<Tensor>& params);
};

// Standard Adam with bias correction. Consumes and clears each parameter's
// accumulated gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

struct TrainOptions {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 5;
    bool verbose = false;
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0;
    double val_macro_f1 = 0;
};

struct History {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;  // 1-based; 0 when no validation ran
    double best_val = 0;

    std::string to_json() const;
};

// Minibatch Adam on the joint loss with early stopping on validation mean
// macro-F1 (patience per options). Best-validation weights are restored.
// An empty validation set disables early stopping and runs max_epochs.
History train(McnnModel& model, const std::vector<Sample>& train_set,
              const std::vector<Sample>& val_set, const TrainOptions& opt);

// One-vs-all report over all three heads. mask_ha / mask_na drop the
// corresponding channel at inference (single-input protocol).
EvalReport evaluate_model(McnnModel& model, const std::vector<Sample>& samples,
                          const std::string& fold_tag, bool mask_ha = false,
                          bool mask_na = false);

struct HyperGrid {
    std::vector<std::size_t> kernel_sizes;     // cnn
    std::vector<std::size_t> embedding_sizes;
    std::vector<std::size_t> num_heads;        // transformer
    std::vector<double> learning_rates;

    static HyperGrid paper_grid(Variant v);

    // Deterministic enumeration order; transformer combos whose embedding is
    // not divisible by the head count are skipped and recorded.
    std::vector<McnnConfig> enumerate(const McnnConfig& base,
                                      std::vector<std::string>* skipped) const;
};

// Vocabularies built from the given training records only.
struct Tokenized {
    TrigramVocab vocab_ha, vocab_na;
};
Tokenized build_vocabs(const std::vector<StrainRecord>& train_records);

std::vector<Sample> make_samples(const std::vector<StrainRecord>& records,
                                 const Tokenized& tok, const McnnConfig& cfg,
                                 const LabelSchema& schema);

struct OuterFoldResult {
    std::size_t fold_index = 0;
    McnnConfig chosen;
    double inner_score = 0;
    std::size_t retrain_epochs = 0;
    EvalReport report;
};

struct NestedCvResult {
    FoldPlan plan;
    std::vector<OuterFoldResult> folds;
    std::vector<std::string> skipped_combos;

    std::string summary_json() const;  // per-metric mean and spread
};

// Grid search by mean inner-validation macro-F1 inside each outer fold;
// the winner retrains on the full outer-train set and is scored once on
// the outer test fold. jobs > 1 runs independent trials concurrently.
NestedCvResult nested_cv(const std::vector<StrainRecord>& records,
                         const LabelSchema& schema, const McnnConfig& base,
                         const HyperGrid& grid, std::size_t k_outer,
                         std::size_t k_inner, std::uint64_t seed,
                         const TrainOptions& opt, std::size_t jobs = 1);

}  // namespace mcnn
