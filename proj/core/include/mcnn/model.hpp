#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcnn/layers.hpp"
#include "mcnn/seq_data.hpp"
#include "mcnn/tensor.hpp"
#include "mcnn/tokenizer.hpp"

namespace mcnn {

enum class Variant { Cnn, Bigru, Transformer };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& s);

struct McnnConfig {
    Variant variant = Variant::Cnn;
    std::size_t embedding_size = 100;
    std::size_t kernel_size = 3;   // cnn
    std::size_t num_heads = 2;     // transformer
    std::size_t filters = 64;      // cnn output width (not stated in the source grid)
    std::size_t hidden_dim = 64;   // bigru
    std::size_t ff_dim = 128;      // transformer
    std::size_t depth = 1;         // transformer blocks per channel
    double learning_rate = 0.005;
    std::uint64_t seed = 0;
    std::size_t max_len_ha = 600;
    std::size_t max_len_na = 500;

    void validate() const;  // throws ConfigError listing every violation
    std::string to_json() const;
    static McnnConfig from_json(const std::string& json_text);
};

/// Per-input encoder: embedding plus the variant-specific stack.
struct Channel {
    EmbeddingTable table;
    Tensor kernels, conv_bias;          // cnn
    GruCell fwd, bwd;                   // bigru
    std::vector<TransformerBlock> blocks;  // transformer

    std::size_t output_width(const McnnConfig& cfg) const;
};

struct McnnModel {
    McnnConfig config;
    TrigramVocab vocab_ha, vocab_na;
    std::vector<std::string> host_classes, ha_classes, na_classes;
    Channel ha_channel, na_channel;
    Dense head_host, head_ha, head_na;

    static McnnModel create(const McnnConfig& config, TrigramVocab vocab_ha,
                            TrigramVocab vocab_na,
                            std::vector<std::string> host_classes,
                            std::vector<std::string> ha_classes,
                            std::vector<std::string> na_classes);

    // All learnable tensors in declared order; stable across runs and the
    // order checkpoints serialize parameter blocks in.
    std::vector<Tensor> parameters();

    // Deep value copy (same shapes, fresh nodes); used to restore best-epoch
    // weights after early stopping.
    std::vector<std::vector<double>> snapshot();
    void restore(const std::vector<std::vector<double>>& snap);
};

struct HeadLogits {
    Tensor host, ha, na;  // each [1 x classes]
};

// Either id sequence may be null; the missing channel contributes a zero
// vector at the concatenation point. Both null is a contract error.
HeadLogits forward_logits(McnnModel& model, const std::vector<int>* ha_ids,
                          const std::vector<int>* na_ids);

// Softmax probabilities per head.
struct HeadProbs {
    std::vector<double> host, ha, na;
};
HeadProbs forward(McnnModel& model, const std::vector<int>* ha_ids,
                  const std::vector<int>* na_ids);

struct Prediction {
    int host_idx = 0, ha_idx = 0, na_idx = 0;
    double host_conf = 0, ha_conf = 0, na_conf = 0;
    HeadProbs probs;
};
Prediction predict(McnnModel& model, const std::vector<int>* ha_ids,
                   const std::vector<int>* na_ids);

struct Sample {
    std::string id;
    std::optional<std::vector<int>> ha_ids, na_ids;
    int host = 0, ha = 0, na = 0;
};

// Unweighted sum of the three per-head softmax cross-entropies, each
// averaged over the batch.
Tensor loss(McnnModel& model, const std::vector<Sample>& batch);

// Tokenizes one curated record against the model's vocabularies.
Sample make_sample(const StrainRecord& r, const TrigramVocab& vocab_ha,
                   const TrigramVocab& vocab_na, const McnnConfig& cfg,
                   const LabelSchema& schema);

void save_model(McnnModel& model, const std::string& path);
McnnModel load_model(const std::string& path);

}  // namespace mcnn
