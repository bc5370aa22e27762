#pragma once

#include <map>
#include <string>
#include <vector>

#include "newscred/model.hpp"

namespace newscred {

enum class Polarity { Positive = 0, Negative = 1 };

// true / mostly-true / half-true are positive; the rest negative.
Polarity to_polarity(CredLabel label);

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// n_classes == 2: binary metrics for class 0 (positive). Otherwise macro
// averages over all n_classes classes; a class with an empty denominator
// contributes zero.
Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                        int n_classes);
// Keyed variant; the two maps must cover exactly the same nodes.
Metrics compute_metrics(const std::map<std::string, int>& truth,
                        const std::map<std::string, int>& pred, int n_classes);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_class(const Tensor& probs);

enum class EvalModes { Both, Bi, Multi };

struct ExperimentConfig {
    std::vector<double> theta_grid = {1.0};
    int k = 10;
    EvalModes modes = EvalModes::Both;
    int parallel = 1;
    ModelConfig model;  // model.seed doubles as the experiment master seed
};

struct MetricRecord {
    TaskMode mode = TaskMode::Bi;
    NodeType node_type = NodeType::Article;
    double theta = 1.0;
    int fold = 0;
    Metrics metrics;
};

struct ExperimentReport {
    std::vector<MetricRecord> records;
};

// Cross-validated sweep over theta_grid x folds. Per cell: rebuild the
// vocabulary from that fold's sampled training nodes, fit, and score the test
// nodes of every category in the requested modes. Deterministic for a fixed
// seed, independent of `parallel`.
ExperimentReport run_experiment(const Hsn& hsn, const ExperimentConfig& cfg);

std::string report_csv(const ExperimentReport& report);
std::string report_means_csv(const ExperimentReport& report);  // fold means
void write_report(const ExperimentReport& report, const std::string& dir);

// The vocabulary exactly as a sweep cell builds it (exposed so the
// training-only property can be checked at harness level).
Vocab fold_vocab(const Hsn& hsn, const Split& split, int fold, const ModelConfig& cfg);

}  // namespace newscred
