#include "mcnn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mcnn {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Cnn: return "cnn";
        case Variant::Bigru: return "bigru";
        default: return "transformer";
    }
}

Variant parse_variant(const std::string& s) {
    if (s == "cnn") return Variant::Cnn;
    if (s == "bigru") return Variant::Bigru;
    if (s == "transformer") return Variant::Transformer;
    throw ConfigError("unknown variant '" + s + "' (expected cnn|bigru|transformer)");
}

void McnnConfig::validate() const {
    std::vector<std::string> bad;
    if (embedding_size < 1) bad.push_back("embedding_size must be >= 1");
    if (learning_rate <= 0) bad.push_back("learning_rate must be > 0");
    if (max_len_ha < 1 || max_len_na < 1) bad.push_back("max_len must be >= 1");
    if (variant == Variant::Cnn) {
        if (kernel_size < 1) bad.push_back("kernel_size must be >= 1");
        if (filters < 1) bad.push_back("filters must be >= 1");
    }
    if (variant == Variant::Bigru && hidden_dim < 1)
        bad.push_back("hidden_dim must be >= 1");
    if (variant == Variant::Transformer) {
        if (num_heads < 1) bad.push_back("num_heads must be >= 1");
        if (embedding_size % 2 != 0)
            bad.push_back("embedding_size must be even for positional encoding");
        if (num_heads >= 1 && embedding_size % num_heads != 0)
            bad.push_back("embedding_size must be divisible by num_heads");
        if (ff_dim < 1) bad.push_back("ff_dim must be >= 1");
        if (depth < 1) bad.push_back("depth must be >= 1");
    }
    if (!bad.empty()) {
        std::string msg = "invalid config:";
        for (const auto& b : bad) msg += " " + b + ";";
        throw ConfigError(msg);
    }
}

std::string McnnConfig::to_json() const {
    nlohmann::json j;
    j["variant"] = variant_name(variant);
    j["embedding_size"] = embedding_size;
    j["kernel_size"] = kernel_size;
    j["num_heads"] = num_heads;
    j["filters"] = filters;
    j["hidden_dim"] = hidden_dim;
    j["ff_dim"] = ff_dim;
    j["depth"] = depth;
    j["learning_rate"] = learning_rate;
    j["seed"] = seed;
    j["max_len_ha"] = max_len_ha;
    j["max_len_na"] = max_len_na;
    return j.dump();
}

McnnConfig McnnConfig::from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config json: ") + e.what());
    }
    McnnConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.embedding_size = j.at("embedding_size").get<std::size_t>();
    c.kernel_size = j.value("kernel_size", std::size_t{3});
    c.num_heads = j.value("num_heads", std::size_t{2});
    c.filters = j.value("filters", std::size_t{64});
    c.hidden_dim = j.value("hidden_dim", std::size_t{64});
    c.ff_dim = j.value("ff_dim", std::size_t{128});
    c.depth = j.value("depth", std::size_t{1});
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.max_len_ha = j.value("max_len_ha", std::size_t{600});
    c.max_len_na = j.value("max_len_na", std::size_t{500});
    return c;
}

std::size_t Channel::output_width(const McnnConfig& cfg) const {
    switch (cfg.variant) {
        case Variant::Cnn: return cfg.filters;
        case Variant::Bigru: return 2 * cfg.hidden_dim;
        default: return cfg.embedding_size;
    }
}

namespace {

Channel make_channel(const McnnConfig& cfg, std::size_t vocab_size,
                     std::uint64_t seed, const std::string& label) {
    Channel ch;
    Rng rng(derive_seed(seed, "channel/" + label));
    ch.table = EmbeddingTable::create(vocab_size, cfg.embedding_size, rng);
    switch (cfg.variant) {
        case Variant::Cnn:
            ch.kernels = uniform_init({cfg.kernel_size, cfg.embedding_size, cfg.filters},
                                      cfg.kernel_size * cfg.embedding_size, rng);
            ch.conv_bias = Tensor::zeros({1, cfg.filters}, true);
            break;
        case Variant::Bigru:
            ch.fwd = GruCell::create(cfg.embedding_size, cfg.hidden_dim, rng);
            ch.bwd = GruCell::create(cfg.embedding_size, cfg.hidden_dim, rng);
            break;
        case Variant::Transformer:
            for (std::size_t d = 0; d < cfg.depth; ++d)
                ch.blocks.push_back(TransformerBlock::create(
                    cfg.embedding_size, cfg.num_heads, cfg.ff_dim, rng));
            break;
    }
    return ch;
}

void append_channel_params(const McnnConfig& cfg, Channel& ch,
                           std::vector<Tensor>& out) {
    out.push_back(ch.table.weights);
    switch (cfg.variant) {
        case Variant::Cnn:
            out.push_back(ch.kernels);
            out.push_back(ch.conv_bias);
            break;
        case Variant::Bigru:
            for (GruCell* c : {&ch.fwd, &ch.bwd})
                for (Tensor* t : {&c->wz, &c->uz, &c->bz, &c->wr, &c->ur, &c->br,
                                  &c->wh, &c->uh, &c->bh})
                    out.push_back(*t);
            break;
        case Variant::Transformer:
            for (auto& blk : ch.blocks)
                for (Tensor* t :
                     {&blk.attn.wq, &blk.attn.wk, &blk.attn.wv, &blk.attn.wo,
                      &blk.ln1.gain, &blk.ln1.bias, &blk.ff.w1, &blk.ff.b1,
                      &blk.ff.w2, &blk.ff.b2, &blk.ln2.gain, &blk.ln2.bias})
                    out.push_back(*t);
            break;
    }
}

// Number of leading non-padding ids; encode() only right-pads.
std::size_t valid_length(const std::vector<int>& ids) {
    std::size_t n = ids.size();
    while (n > 0 && ids[n - 1] == kPadId) --n;
    return n;
}

Tensor channel_encode(const McnnConfig& cfg, Channel& ch, const std::vector<int>& ids) {
    const std::size_t vlen = valid_length(ids);
    if (vlen == 0) throw EmptySequenceError("channel input is all padding");
    switch (cfg.variant) {
        case Variant::Cnn: {
            std::vector<int> trimmed(ids.begin(), ids.begin() + vlen);
            Tensor x = embed(trimmed, ch.table);
            Tensor y = relu(conv1d_valid(x, ch.kernels, ch.conv_bias));
            return pool_mean(y, std::vector<bool>(y.rows(), true));
        }
        case Variant::Bigru: {
            Tensor x = embed(ids, ch.table);
            std::vector<bool> mask(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] != kPadId;
            return bigru_encode(x, mask, ch.fwd, ch.bwd);
        }
        default: {
            Tensor x = add(embed(ids, ch.table),
                           positional_encoding(ids.size(), cfg.embedding_size));
            std::vector<bool> mask(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] != kPadId;
            for (auto& blk : ch.blocks) x = transformer_block(x, blk, mask);
            return pool_mean(x, mask);
        }
    }
}

}  // namespace

McnnModel McnnModel::create(const McnnConfig& config, TrigramVocab vocab_ha,
                            TrigramVocab vocab_na,
                            std::vector<std::string> host_classes,
                            std::vector<std::string> ha_classes,
                            std::vector<std::string> na_classes) {
    config.validate();
    if (host_classes.empty() || ha_classes.empty() || na_classes.empty())
        throw ConfigError("model needs non-empty class lists for all three heads");
    McnnModel m;
    m.config = config;
    m.vocab_ha = std::move(vocab_ha);
    m.vocab_na = std::move(vocab_na);
    m.host_classes = std::move(host_classes);
    m.ha_classes = std::move(ha_classes);
    m.na_classes = std::move(na_classes);
    m.ha_channel = make_channel(config, m.vocab_ha.size(), config.seed, "ha");
    m.na_channel = make_channel(config, m.vocab_na.size(), config.seed, "na");
    const std::size_t width = 2 * m.ha_channel.output_width(config);
    Rng rng(derive_seed(config.seed, "heads"));
    m.head_host = Dense::create(width, m.host_classes.size(), rng);
    m.head_ha = Dense::create(width, m.ha_classes.size(), rng);
    m.head_na = Dense::create(width, m.na_classes.size(), rng);
    return m;
}

std::vector<Tensor> McnnModel::parameters() {
    std::vector<Tensor> out;
    append_channel_params(config, ha_channel, out);
    append_channel_params(config, na_channel, out);
    for (Dense* d : {&head_host, &head_ha, &head_na}) {
        out.push_back(d->w);
        out.push_back(d->b);
    }
    return out;
}

std::vector<std::vector<double>> McnnModel::snapshot() {
    std::vector<std::vector<double>> snap;
    for (auto& p : parameters()) snap.push_back(p.values());
    return snap;
}

void McnnModel::restore(const std::vector<std::vector<double>>& snap) {
    auto params = parameters();
    if (snap.size() != params.size())
        throw ContractError("restore: snapshot has wrong parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (snap[i].size() != params[i].size())
            throw ContractError("restore: parameter size mismatch");
        params[i].values() = snap[i];
    }
}

HeadLogits forward_logits(McnnModel& model, const std::vector<int>* ha_ids,
                          const std::vector<int>* na_ids) {
    if (!ha_ids && !na_ids)
        throw ContractError("forward: both channels absent");
    const std::size_t width = model.ha_channel.output_width(model.config);
    Tensor ha_vec = ha_ids ? channel_encode(model.config, model.ha_channel, *ha_ids)
                           : Tensor::zeros({1, width});
    Tensor na_vec = na_ids ? channel_encode(model.config, model.na_channel, *na_ids)
                           : Tensor::zeros({1, width});
    Tensor joint = concat_cols({ha_vec, na_vec});
    HeadLogits out;
    out.host = dense(joint, model.head_host);
    out.ha = dense(joint, model.head_ha);
    out.na = dense(joint, model.head_na);
    return out;
}

namespace {

std::vector<double> softmax_vec(const Tensor& logits) {
    std::vector<double> p(logits.values());
    double mx = p[0];
    for (double v : p) mx = std::max(mx, v);
    double z = 0.0;
    for (auto& v : p) {
        v = std::exp(v - mx);
        z += v;
    }
    for (auto& v : p) v /= z;
    return p;
}

int argmax_low(const std::vector<double>& p) {
    int best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = static_cast<int>(i);  // ties keep the lower index
    return best;
}

}  // namespace

HeadProbs forward(McnnModel& model, const std::vector<int>* ha_ids,
                  const std::vector<int>* na_ids) {
    HeadLogits l = forward_logits(model, ha_ids, na_ids);
    return {softmax_vec(l.host), softmax_vec(l.ha), softmax_vec(l.na)};
}

Prediction predict(McnnModel& model, const std::vector<int>* ha_ids,
                   const std::vector<int>* na_ids) {
    Prediction p;
    p.probs = forward(model, ha_ids, na_ids);
    p.host_idx = argmax_low(p.probs.host);
    p.ha_idx = argmax_low(p.probs.ha);
    p.na_idx = argmax_low(p.probs.na);
    p.host_conf = p.probs.host[p.host_idx];
    p.ha_conf = p.probs.ha[p.ha_idx];
    p.na_conf = p.probs.na[p.na_idx];
    return p;
}

Tensor loss(McnnModel& model, const std::vector<Sample>& batch) {
    if (batch.empty()) throw ContractError("loss: empty batch");
    std::vector<Tensor> host_rows, ha_rows, na_rows;
    std::vector<int> host_t, ha_t, na_t;
    for (const auto& s : batch) {
        if (s.host < 0 || static_cast<std::size_t>(s.host) >= model.host_classes.size() ||
            s.ha < 0 || static_cast<std::size_t>(s.ha) >= model.ha_classes.size() ||
            s.na < 0 || static_cast<std::size_t>(s.na) >= model.na_classes.size())
            throw LabelError("sample '" + s.id + "' has a label outside the schema");
        HeadLogits l = forward_logits(model, s.ha_ids ? &*s.ha_ids : nullptr,
                                      s.na_ids ? &*s.na_ids : nullptr);
        host_rows.push_back(l.host);
        ha_rows.push_back(l.ha);
        na_rows.push_back(l.na);
        host_t.push_back(s.host);
        ha_t.push_back(s.ha);
        na_t.push_back(s.na);
    }
    Tensor lh = softmax_cross_entropy(stack_rows(host_rows), host_t);
    Tensor la = softmax_cross_entropy(stack_rows(ha_rows), ha_t);
    Tensor ln = softmax_cross_entropy(stack_rows(na_rows), na_t);
    return add(add(lh, la), ln);
}

Sample make_sample(const StrainRecord& r, const TrigramVocab& vocab_ha,
                   const TrigramVocab& vocab_na, const McnnConfig& cfg,
                   const LabelSchema& schema) {
    Sample s;
    s.id = r.strain_id;
    if (r.ha_seq)
        s.ha_ids = vocab_ha.encode(extract_ngrams(*r.ha_seq, vocab_ha.n()), cfg.max_len_ha);
    if (r.na_seq)
        s.na_ids = vocab_na.encode(extract_ngrams(*r.na_seq, vocab_na.n()), cfg.max_len_na);
    s.host = schema.host_index(r.host_class);
    s.ha = schema.ha_index(r.ha_class);
    s.na = schema.na_index(r.na_class);
    if (s.host < 0 || s.ha < 0 || s.na < 0)
        throw LabelError("record '" + r.strain_id + "' has labels outside the schema");
    return s;
}

// --- checkpoint --------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'M', 'C', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_model(McnnModel& model, const std::string& path) {
    nlohmann::json header;
    header["config"] = nlohmann::json::parse(model.config.to_json());
    header["vocab_ha"] = nlohmann::json::parse(model.vocab_ha.to_json());
    header["vocab_na"] = nlohmann::json::parse(model.vocab_na.to_json());
    header["vocab_ha_hash"] = model.vocab_ha.content_hash();
    header["vocab_na_hash"] = model.vocab_na.content_hash();
    header["host_classes"] = model.host_classes;
    header["ha_classes"] = model.ha_classes;
    header["na_classes"] = model.na_classes;
    auto params = model.parameters();
    nlohmann::json manifest = nlohmann::json::array();
    for (auto& p : params) manifest.push_back(p.shape());
    header["params"] = manifest;
    const std::string hjson = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    std::uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    std::uint64_t hlen = hjson.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hjson.data(), static_cast<std::streamsize>(hjson.size()));
    for (auto& p : params)
        out.write(reinterpret_cast<const char*>(p.values().data()),
                  static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!out) throw CheckpointError("short write to checkpoint: " + path);
}

McnnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("not a checkpoint file: " + path);
    std::uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (!in || ver != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(ver));
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in) throw CheckpointError("truncated checkpoint header: " + path);
    std::string hjson(hlen, '\0');
    in.read(hjson.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw CheckpointError("truncated checkpoint header: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hjson);
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
    }

    McnnConfig cfg = McnnConfig::from_json(header.at("config").dump());
    TrigramVocab vha = TrigramVocab::from_json(header.at("vocab_ha").dump());
    TrigramVocab vna = TrigramVocab::from_json(header.at("vocab_na").dump());
    if (vha.content_hash() != header.at("vocab_ha_hash").get<std::uint64_t>() ||
        vna.content_hash() != header.at("vocab_na_hash").get<std::uint64_t>())
        throw CheckpointError("vocabulary hash mismatch; refusing to load " + path);

    McnnModel m = McnnModel::create(
        cfg, std::move(vha), std::move(vna),
        header.at("host_classes").get<std::vector<std::string>>(),
        header.at("ha_classes").get<std::vector<std::string>>(),
        header.at("na_classes").get<std::vector<std::string>>());

    auto params = m.parameters();
    const auto& manifest = header.at("params");
    if (manifest.size() != params.size())
        throw CheckpointError("parameter manifest size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto shape = manifest[i].get<std::vector<std::size_t>>();
        if (shape != params[i].shape())
            throw CheckpointError("parameter " + std::to_string(i) +
                                  " shape mismatch vs embedded config");
        in.read(reinterpret_cast<char*>(params[i].values().data()),
                static_cast<std::streamsize>(params[i].size() * sizeof(double)));
        if (!in) throw CheckpointError("truncated parameter block in " + path);
    }
    return m;
}

}  // namespace mcnn
