#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcnn/errors.hpp"

namespace mcnn {

struct Prf {
    double precision = 0, recall = 0, f1 = 0;
};

// Zero denominators yield 0 (convention for rare classes; callers may log).
Prf precision_recall_f1(long long tp, long long fp, long long fn);

// Sum over the ranking sweep of (R_n - R_{n-1}) * P_n, scores sorted
// descending with stable tie order. Throws ContractError with no positives.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

struct PrPoint {
    double recall = 0, precision = 0;
};

// One (recall@k, precision@k) point per rank position.
std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                              const std::vector<int>& labels);

struct ClassReport {
    std::string name;
    std::size_t support = 0;  // true instances
    Prf prf;
    std::optional<double> ap;  // absent when the class has no positives
    std::vector<PrPoint> curve;
};

struct HeadReport {
    std::string head;
    std::vector<ClassReport> classes;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    std::optional<double> macro_ap;
    double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
    std::vector<std::string> notes;
};

// One-vs-all adaptation: per class, labels binarized and scored by that
// class's probability; P/R/F1 come from the argmax confusion matrix;
// macro averages run over classes with at least one true instance.
HeadReport one_vs_all_report(const std::string& head_name,
                             const std::vector<std::vector<double>>& probs,
                             const std::vector<int>& truth,
                             const std::vector<std::string>& class_names);

struct EvalReport {
    std::string fold;  // provenance tag, e.g. "outer-2"
    std::vector<HeadReport> heads;

    std::string to_json() const;
    // class,recall,precision rows, one file's worth of CSV text
    std::string pr_curves_csv() const;
};

// Mean of the three heads' macro-F1; the model-selection score.
double mean_macro_f1(const EvalReport& report);

}  // namespace mcnn
