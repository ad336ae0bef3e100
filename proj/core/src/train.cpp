#include "mcnn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "mcnn/rng.hpp"

namespace mcnn {

AdamState AdamState::init(const std::vector<Tensor>& params) {
    AdamState st;
    for (const auto& p : params) {
        st.m.emplace_back(p.size(), 0.0);
        st.v.emplace_back(p.size(), 0.0);
    }
    return st;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    if (state.m.size() != params.size())
        throw ContractError("adam_step: state does not match parameter list");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& vals = params[i].values();
        auto& g = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < vals.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            vals[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + state.eps);
        }
        params[i].clear_grad();
    }
}

std::string History::to_json() const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["best_val_macro_f1"] = best_val;
    j["epochs"] = nlohmann::json::array();
    for (const auto& e : epochs)
        j["epochs"].push_back({{"epoch", e.epoch},
                               {"train_loss", e.train_loss},
                               {"val_macro_f1", e.val_macro_f1}});
    return j.dump(2);
}

EvalReport evaluate_model(McnnModel& model, const std::vector<Sample>& samples,
                          const std::string& fold_tag, bool mask_ha, bool mask_na) {
    std::vector<std::vector<double>> host_p, ha_p, na_p;
    std::vector<int> host_t, ha_t, na_t;
    for (const auto& s : samples) {
        const std::vector<int>* ha = (!mask_ha && s.ha_ids) ? &*s.ha_ids : nullptr;
        const std::vector<int>* na = (!mask_na && s.na_ids) ? &*s.na_ids : nullptr;
        HeadProbs probs = forward(model, ha, na);
        host_p.push_back(std::move(probs.host));
        ha_p.push_back(std::move(probs.ha));
        na_p.push_back(std::move(probs.na));
        host_t.push_back(s.host);
        ha_t.push_back(s.ha);
        na_t.push_back(s.na);
    }
    EvalReport rep;
    rep.fold = fold_tag;
    rep.heads.push_back(one_vs_all_report("host", host_p, host_t, model.host_classes));
    rep.heads.push_back(one_vs_all_report("ha_subtype", ha_p, ha_t, model.ha_classes));
    rep.heads.push_back(one_vs_all_report("na_subtype", na_p, na_t, model.na_classes));
    return rep;
}

History train(McnnModel& model, const std::vector<Sample>& train_set,
              const std::vector<Sample>& val_set, const TrainOptions& opt) {
    if (train_set.empty()) throw ContractError("train: empty training set");
    auto params = model.parameters();
    AdamState state = AdamState::init(params);
    Rng shuffle_rng(derive_seed(model.config.seed, "train/shuffle"));

    History hist;
    std::vector<std::vector<double>> best_snap;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += opt.batch_size) {
            std::vector<Sample> batch;
            for (std::size_t i = b; i < std::min(order.size(), b + opt.batch_size); ++i)
                batch.push_back(train_set[order[i]]);
            Tensor l = loss(model, batch);
            backward(l);
            adam_step(params, state, model.config.learning_rate);
            loss_sum += l.item();
            ++batches;
        }
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(batches);
        if (!val_set.empty()) {
            es.val_macro_f1 = mean_macro_f1(evaluate_model(model, val_set, "val"));
            if (hist.epochs.empty() || es.val_macro_f1 > hist.best_val) {
                hist.best_val = es.val_macro_f1;
                hist.best_epoch = epoch;
                best_snap = model.snapshot();
                since_best = 0;
            } else {
                ++since_best;
            }
        }
        if (opt.verbose)
            std::printf("epoch %zu loss %.6f val_macro_f1 %.4f\n", epoch,
                        es.train_loss, es.val_macro_f1);
        hist.epochs.push_back(es);
        if (!val_set.empty() && since_best >= opt.patience) break;
    }
    if (!best_snap.empty()) model.restore(best_snap);
    if (val_set.empty()) hist.best_epoch = hist.epochs.size();
    return hist;
}

// --- hyperparameter grid ------------------------------------------------------

HyperGrid HyperGrid::paper_grid(Variant v) {
    HyperGrid g;
    g.learning_rates = {0.01, 0.005, 0.001, 0.0001};
    switch (v) {
        case Variant::Cnn:
            g.kernel_sizes = {3, 4, 5};
            g.embedding_sizes = {50, 100, 150, 200};
            break;
        case Variant::Bigru:
            g.embedding_sizes = {50, 100, 150, 200};
            break;
        case Variant::Transformer:
            g.embedding_sizes = {32, 64, 128};
            g.num_heads = {1, 2, 3, 4, 5};
            break;
    }
    return g;
}

std::vector<McnnConfig> HyperGrid::enumerate(const McnnConfig& base,
                                             std::vector<std::string>* skipped) const {
    std::vector<McnnConfig> out;
    const auto kernels = (base.variant == Variant::Cnn && !kernel_sizes.empty())
                             ? kernel_sizes
                             : std::vector<std::size_t>{base.kernel_size};
    const auto embeds = embedding_sizes.empty()
                            ? std::vector<std::size_t>{base.embedding_size}
                            : embedding_sizes;
    const auto heads = (base.variant == Variant::Transformer && !num_heads.empty())
                           ? num_heads
                           : std::vector<std::size_t>{base.num_heads};
    const auto lrs = learning_rates.empty() ? std::vector<double>{base.learning_rate}
                                            : learning_rates;
    for (auto ks : kernels)
        for (auto emb : embeds)
            for (auto lr : lrs)
                for (auto h : heads) {
                    McnnConfig c = base;
                    c.kernel_size = ks;
                    c.embedding_size = emb;
                    c.learning_rate = lr;
                    c.num_heads = h;
                    if (base.variant == Variant::Transformer && emb % h != 0) {
                        if (skipped)
                            skipped->push_back("embedding " + std::to_string(emb) +
                                               " not divisible by heads " +
                                               std::to_string(h) + "; skipped");
                        continue;
                    }
                    out.push_back(c);
                }
    return out;
}

// --- nested cross-validation -----------------------------------------------------

Tokenized build_vocabs(const std::vector<StrainRecord>& train_records) {
    std::vector<std::vector<std::string>> ha_corpus, na_corpus;
    for (const auto& r : train_records) {
        if (r.ha_seq && r.ha_seq->size() >= 3)
            ha_corpus.push_back(extract_ngrams(*r.ha_seq, 3));
        if (r.na_seq && r.na_seq->size() >= 3)
            na_corpus.push_back(extract_ngrams(*r.na_seq, 3));
    }
    Tokenized t;
    t.vocab_ha = TrigramVocab::build(ha_corpus);
    t.vocab_na = TrigramVocab::build(na_corpus);
    return t;
}

std::vector<Sample> make_samples(const std::vector<StrainRecord>& records,
                                 const Tokenized& tok, const McnnConfig& cfg,
                                 const LabelSchema& schema) {
    std::vector<Sample> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(make_sample(r, tok.vocab_ha, tok.vocab_na, cfg, schema));
    return out;
}

namespace {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t nthreads = std::min(jobs, n);
    for (std::size_t w = 0; w < nthreads; ++w)
        workers.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : workers) t.join();
}

std::vector<StrainRecord> select_by_ids(const std::vector<StrainRecord>& records,
                                        const std::unordered_set<std::string>& ids,
                                        bool keep) {
    std::vector<StrainRecord> out;
    for (const auto& r : records)
        if (ids.contains(r.strain_id) == keep) out.push_back(r);
    return out;
}

}  // namespace

NestedCvResult nested_cv(const std::vector<StrainRecord>& records,
                         const LabelSchema& schema, const McnnConfig& base,
                         const HyperGrid& grid, std::size_t k_outer,
                         std::size_t k_inner, std::uint64_t seed,
                         const TrainOptions& opt, std::size_t jobs) {
    NestedCvResult result;
    result.plan = plan_nested_folds(records, k_outer, k_inner, seed);
    const auto combos = grid.enumerate(base, &result.skipped_combos);
    if (combos.empty()) throw ConfigError("nested_cv: hyperparameter grid is empty");

    for (std::size_t o = 0; o < k_outer; ++o) {
        std::unordered_set<std::string> test_ids(result.plan.outer_test[o].begin(),
                                                 result.plan.outer_test[o].end());
        auto outer_train = select_by_ids(records, test_ids, false);
        auto outer_test = select_by_ids(records, test_ids, true);

        // tokenize each inner split once; shared read-only across combos
        struct InnerSplit {
            Tokenized tok;
            std::vector<Sample> train, val;
        };
        std::vector<InnerSplit> inner(k_inner);
        for (std::size_t i = 0; i < k_inner; ++i) {
            std::unordered_set<std::string> val_ids(result.plan.inner_val[o][i].begin(),
                                                    result.plan.inner_val[o][i].end());
            auto tr = select_by_ids(outer_train, val_ids, false);
            auto va = select_by_ids(outer_train, val_ids, true);
            inner[i].tok = build_vocabs(tr);
            inner[i].train = make_samples(tr, inner[i].tok, base, schema);
            inner[i].val = make_samples(va, inner[i].tok, base, schema);
        }

        const std::size_t n_trials = combos.size() * k_inner;
        std::vector<double> trial_score(n_trials, 0.0);
        std::vector<std::size_t> trial_best_epoch(n_trials, 0);
        parallel_for(n_trials, jobs, [&](std::size_t t) {
            const std::size_t c = t / k_inner;
            const std::size_t i = t % k_inner;
            McnnConfig cfg = combos[c];
            cfg.seed = derive_seed(seed, "cv/outer" + std::to_string(o) + "/inner" +
                                             std::to_string(i) + "/combo" +
                                             std::to_string(c));
            McnnModel model = McnnModel::create(cfg, inner[i].tok.vocab_ha,
                                                inner[i].tok.vocab_na,
                                                schema.host_categories,
                                                schema.ha_classes, schema.na_classes);
            History h = train(model, inner[i].train, inner[i].val, opt);
            trial_score[t] = h.best_val;
            trial_best_epoch[t] = h.best_epoch;
        });

        std::size_t winner = 0;
        double winner_score = -1.0;
        std::vector<double> combo_epoch_mean(combos.size(), 0.0);
        for (std::size_t c = 0; c < combos.size(); ++c) {
            double s = 0, e = 0;
            for (std::size_t i = 0; i < k_inner; ++i) {
                s += trial_score[c * k_inner + i];
                e += static_cast<double>(trial_best_epoch[c * k_inner + i]);
            }
            s /= static_cast<double>(k_inner);
            combo_epoch_mean[c] = e / static_cast<double>(k_inner);
            if (s > winner_score) {  // ties keep the earlier combo
                winner_score = s;
                winner = c;
            }
        }

        // retrain the winner on the full outer-train set for the mean number
        // of epochs the inner runs needed
        McnnConfig final_cfg = combos[winner];
        final_cfg.seed = derive_seed(seed, "cv/outer" + std::to_string(o) + "/final");
        Tokenized tok = build_vocabs(outer_train);
        auto train_samples = make_samples(outer_train, tok, final_cfg, schema);
        auto test_samples = make_samples(outer_test, tok, final_cfg, schema);
        TrainOptions final_opt = opt;
        final_opt.max_epochs = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(combo_epoch_mean[winner])));
        McnnModel model = McnnModel::create(final_cfg, tok.vocab_ha, tok.vocab_na,
                                            schema.host_categories, schema.ha_classes,
                                            schema.na_classes);
        train(model, train_samples, {}, final_opt);

        OuterFoldResult fr;
        fr.fold_index = o;
        fr.chosen = combos[winner];
        fr.inner_score = winner_score;
        fr.retrain_epochs = final_opt.max_epochs;
        fr.report = evaluate_model(model, test_samples, "outer-" + std::to_string(o));
        result.folds.push_back(std::move(fr));
    }
    return result;
}

std::string NestedCvResult::summary_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["k_outer"] = plan.k_outer;
    j["k_inner"] = plan.k_inner;
    j["seed"] = plan.seed;
    j["skipped_combos"] = skipped_combos;
    j["folds"] = nlohmann::json::array();
    std::unordered_map<std::string, std::vector<double>> metric;
    for (const auto& f : folds) {
        nlohmann::json fj;
        fj["fold"] = f.fold_index;
        fj["chosen_config"] = nlohmann::json::parse(f.chosen.to_json());
        fj["inner_score"] = f.inner_score;
        fj["retrain_epochs"] = f.retrain_epochs;
        for (const auto& h : f.report.heads) {
            fj["macro_f1_" + h.head] = h.macro_f1;
            metric["macro_f1_" + h.head].push_back(h.macro_f1);
            if (h.macro_ap) {
                fj["macro_ap_" + h.head] = *h.macro_ap;
                metric["macro_ap_" + h.head].push_back(*h.macro_ap);
            }
        }
        j["folds"].push_back(fj);
    }
    nlohmann::json summary;
    for (auto& [name, vals] : metric) {
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double se = vals.size() > 1
                              ? std::sqrt(var / static_cast<double>(vals.size() - 1)) /
                                    std::sqrt(static_cast<double>(vals.size()))
                              : 0.0;
        summary[name] = {{"mean", mean},
                         {"ci95_low", mean - 1.96 * se},
                         {"ci95_high", mean + 1.96 * se},
                         {"ci_method", "per-fold mean +/- 1.96*SE"}};
    }
    j["summary"] = summary;
    return j.dump(2);
}

}  // namespace mcnn
