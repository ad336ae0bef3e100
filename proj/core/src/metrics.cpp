#include "mcnn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mcnn {

Prf precision_recall_f1(long long tp, long long fp, long long fn) {
    if (tp < 0 || fp < 0 || fn < 0)
        throw ContractError("precision_recall_f1: negative counts");
    Prf m;
    m.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

namespace {

std::vector<std::size_t> ranking(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ContractError("average_precision: scores/labels length mismatch");
    long long total_pos = 0;
    for (int l : labels) total_pos += l ? 1 : 0;
    if (total_pos == 0)
        throw ContractError("average_precision: undefined, no positive labels");
    const auto idx = ranking(scores);
    double ap = 0.0;
    long long tp = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (!labels[idx[k]]) continue;
        ++tp;
        // recall increments by 1/total_pos exactly at positive ranks
        ap += (static_cast<double>(tp) / static_cast<double>(k + 1)) /
              static_cast<double>(total_pos);
    }
    return ap;
}

std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
    long long total_pos = 0;
    for (int l : labels) total_pos += l ? 1 : 0;
    const auto idx = ranking(scores);
    std::vector<PrPoint> out;
    out.reserve(idx.size());
    long long tp = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        tp += labels[idx[k]] ? 1 : 0;
        PrPoint p;
        p.precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        p.recall = total_pos == 0 ? 0.0
                                  : static_cast<double>(tp) / static_cast<double>(total_pos);
        out.push_back(p);
    }
    return out;
}

HeadReport one_vs_all_report(const std::string& head_name,
                             const std::vector<std::vector<double>>& probs,
                             const std::vector<int>& truth,
                             const std::vector<std::string>& class_names) {
    if (probs.size() != truth.size())
        throw ContractError("one_vs_all_report: probs/truth length mismatch");
    const std::size_t n_classes = class_names.size();
    HeadReport rep;
    rep.head = head_name;
    rep.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));

    std::vector<int> pred(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i].size() != n_classes)
            throw ContractError("one_vs_all_report: probability row width mismatch");
        int best = 0;
        for (std::size_t c = 1; c < n_classes; ++c)
            if (probs[i][c] > probs[i][best]) best = static_cast<int>(c);
        pred[i] = best;
        if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= n_classes)
            throw LabelError("one_vs_all_report: truth label out of range at row " +
                             std::to_string(i));
        rep.confusion[truth[i]][best]++;
    }

    long long micro_tp = 0, micro_fp = 0, micro_fn = 0;
    double sum_p = 0, sum_r = 0, sum_f = 0, sum_ap = 0;
    std::size_t macro_n = 0, ap_n = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        long long tp = static_cast<long long>(rep.confusion[c][c]);
        long long fp = 0, fn = 0;
        for (std::size_t o = 0; o < n_classes; ++o) {
            if (o == c) continue;
            fp += static_cast<long long>(rep.confusion[o][c]);
            fn += static_cast<long long>(rep.confusion[c][o]);
        }
        ClassReport cr;
        cr.name = class_names[c];
        cr.support = 0;
        for (std::size_t o = 0; o < n_classes; ++o) cr.support += rep.confusion[c][o];
        const bool predicted = (tp + fp) > 0;
        if (cr.support == 0 && !predicted) {
            rep.notes.push_back("class '" + cr.name +
                                "' absent from truth and predictions; excluded");
            rep.classes.push_back(std::move(cr));
            continue;
        }
        cr.prf = precision_recall_f1(tp, fp, fn);
        if ((tp + fp) == 0 || (tp + fn) == 0)
            rep.notes.push_back("class '" + cr.name +
                                "' hit a zero denominator; metric defined as 0");
        std::vector<double> scores(probs.size());
        std::vector<int> bin(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            scores[i] = probs[i][c];
            bin[i] = truth[i] == static_cast<int>(c) ? 1 : 0;
        }
        if (cr.support > 0) {
            cr.ap = average_precision(scores, bin);
            cr.curve = pr_curve(scores, bin);
            sum_ap += *cr.ap;
            ++ap_n;
        } else {
            rep.notes.push_back("class '" + cr.name +
                                "' has no positives; AP undefined, excluded from macro");
        }
        if (cr.support > 0) {
            sum_p += cr.prf.precision;
            sum_r += cr.prf.recall;
            sum_f += cr.prf.f1;
            ++macro_n;
            micro_tp += tp;
            micro_fp += fp;
            micro_fn += fn;
        }
        rep.classes.push_back(std::move(cr));
    }
    if (macro_n > 0) {
        rep.macro_precision = sum_p / static_cast<double>(macro_n);
        rep.macro_recall = sum_r / static_cast<double>(macro_n);
        rep.macro_f1 = sum_f / static_cast<double>(macro_n);
    }
    if (ap_n > 0) rep.macro_ap = sum_ap / static_cast<double>(ap_n);
    Prf micro = precision_recall_f1(micro_tp, micro_fp, micro_fn);
    rep.micro_precision = micro.precision;
    rep.micro_recall = micro.recall;
    rep.micro_f1 = micro.f1;
    return rep;
}

namespace {

nlohmann::json head_to_json(const HeadReport& h) {
    nlohmann::json j;
    j["head"] = h.head;
    j["macro"] = {{"precision", h.macro_precision},
                  {"recall", h.macro_recall},
                  {"f1", h.macro_f1}};
    if (h.macro_ap) j["macro"]["ap"] = *h.macro_ap;
    j["micro"] = {{"precision", h.micro_precision},
                  {"recall", h.micro_recall},
                  {"f1", h.micro_f1}};
    j["classes"] = nlohmann::json::array();
    for (const auto& c : h.classes) {
        nlohmann::json cj;
        cj["name"] = c.name;
        cj["support"] = c.support;
        cj["precision"] = c.prf.precision;
        cj["recall"] = c.prf.recall;
        cj["f1"] = c.prf.f1;
        if (c.ap) cj["ap"] = *c.ap;
        j["classes"].push_back(cj);
    }
    j["confusion"] = h.confusion;
    j["notes"] = h.notes;
    return j;
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["fold"] = fold;
    j["heads"] = nlohmann::json::array();
    for (const auto& h : heads) j["heads"].push_back(head_to_json(h));
    return j.dump(2);
}

std::string EvalReport::pr_curves_csv() const {
    std::ostringstream os;
    os << "head,class,recall,precision\n";
    for (const auto& h : heads)
        for (const auto& c : h.classes)
            for (const auto& p : c.curve)
                os << h.head << "," << c.name << "," << p.recall << "," << p.precision
                   << "\n";
    return os.str();
}

double mean_macro_f1(const EvalReport& report) {
    if (report.heads.empty()) return 0.0;
    double s = 0.0;
    for (const auto& h : report.heads) s += h.macro_f1;
    return s / static_cast<double>(report.heads.size());
}

}  // namespace mcnn
