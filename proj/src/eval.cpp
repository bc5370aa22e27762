#include "newscred/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <thread>

#include "newscred/errors.hpp"

namespace newscred {

Polarity to_polarity(CredLabel label) {
    return label_score(label) >= 4 ? Polarity::Positive : Polarity::Negative;
}

Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                        int n_classes) {
    if (n_classes < 2) throw UsageError("compute_metrics: need at least 2 classes");
    if (truth.size() != pred.size())
        throw UsageError("compute_metrics: " + std::to_string(truth.size()) + " truth vs " +
                         std::to_string(pred.size()) + " predicted labels");
    if (truth.empty()) throw UsageError("compute_metrics: no samples");
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] < 0 || truth[i] >= n_classes || pred[i] < 0 || pred[i] >= n_classes)
            throw UsageError("compute_metrics: class index outside 0.." +
                             std::to_string(n_classes - 1));

    const std::size_t n = truth.size();
    std::vector<double> tp(n_classes, 0), in_truth(n_classes, 0), in_pred(n_classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        in_truth[truth[i]] += 1;
        in_pred[pred[i]] += 1;
        if (truth[i] == pred[i]) {
            tp[truth[i]] += 1;
            ++correct;
        }
    }
    auto ratio = [](double num, double den) { return den > 0 ? num / den : 0.0; };
    auto f1_of = [](double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; };

    Metrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (n_classes == 2) {
        m.precision = ratio(tp[0], in_pred[0]);
        m.recall = ratio(tp[0], in_truth[0]);
        m.f1 = f1_of(m.precision, m.recall);
    } else {
        for (int c = 0; c < n_classes; ++c) {
            double p = ratio(tp[c], in_pred[c]);
            double r = ratio(tp[c], in_truth[c]);
            m.precision += p;
            m.recall += r;
            m.f1 += f1_of(p, r);
        }
        m.precision /= n_classes;
        m.recall /= n_classes;
        m.f1 /= n_classes;
    }
    return m;
}

Metrics compute_metrics(const std::map<std::string, int>& truth,
                        const std::map<std::string, int>& pred, int n_classes) {
    if (truth.size() != pred.size())
        throw UsageError("compute_metrics: truth and prediction cover different nodes");
    std::vector<int> t, p;
    t.reserve(truth.size());
    p.reserve(truth.size());
    auto it = pred.begin();
    for (const auto& [id, cls] : truth) {
        if (it->first != id)
            throw UsageError("compute_metrics: key mismatch, truth has \"" + id +
                             "\" where predictions have \"" + it->first + "\"");
        t.push_back(cls);
        p.push_back(it->second);
        ++it;
    }
    return compute_metrics(t, p, n_classes);
}

std::size_t argmax_class(const Tensor& probs) {
    const auto& v = probs.values();
    if (v.empty()) throw UsageError("argmax_class: empty tensor");
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Vocab fold_vocab(const Hsn& hsn, const Split& split, int fold, const ModelConfig& cfg) {
    return build_vocab(hsn, fold_data(split, fold).train, cfg.d, cfg.tokenizer);
}

namespace {

CredLabel node_label(const Hsn& hsn, NodeType type, const std::string& id) {
    switch (type) {
        case NodeType::Article:
            return hsn.articles.at(id).label;
        case NodeType::Creator:
            return *hsn.creators.at(id).label;
        default:
            return *hsn.subjects.at(id).label;
    }
}

// One (theta, fold, mode) training cell; produces a record per node type.
std::vector<MetricRecord> run_cell(const Hsn& hsn, const Split& split, std::size_t theta_index,
                                   double theta, int fold, TaskMode mode,
                                   const ExperimentConfig& cfg) {
    ModelConfig mc = cfg.model;
    mc.mode = mode;
    mc.seed = splitmix64(cfg.model.seed ^
                         fnv1a64("cell." + std::to_string(theta_index) + "." +
                                 std::to_string(fold) + "." + mode_name(mode)));
    FoldData fd = fold_data(split, fold);
    Vocab vocab = build_vocab(hsn, fd.train, mc.d, mc.tokenizer);
    FitResult fitted = fit(hsn, vocab, fd, mc);
    DiffusionState st = infer_states(hsn, vocab, fitted.params, mc);

    const bool binary = mode == TaskMode::Bi;
    const int n_classes = binary ? 2 : kNumClasses;
    std::vector<MetricRecord> records;
    for (NodeType type : {NodeType::Article, NodeType::Creator, NodeType::Subject}) {
        const auto& test_ids = type == NodeType::Article   ? fd.test.articles
                               : type == NodeType::Creator ? fd.test.creators
                                                           : fd.test.subjects;
        auto probs = predict(nullptr, fitted.params, st, type, test_ids);
        std::vector<int> truth, pred;
        truth.reserve(test_ids.size());
        pred.reserve(test_ids.size());
        for (const auto& id : test_ids) {
            CredLabel label = node_label(hsn, type, id);
            std::size_t top = argmax_class(probs.at(id));
            if (binary && mc.bi_from_multi) {
                // 6-way head collapsed to polarity at scoring time.
                truth.push_back(to_polarity(label) == Polarity::Positive ? 0 : 1);
                pred.push_back(to_polarity(static_cast<CredLabel>(top)) == Polarity::Positive
                                   ? 0
                                   : 1);
            } else {
                truth.push_back(static_cast<int>(
                    head_class_index(static_cast<std::size_t>(n_classes), label)));
                pred.push_back(static_cast<int>(top));
            }
        }
        MetricRecord rec;
        rec.mode = mode;
        rec.node_type = type;
        rec.theta = theta;
        rec.fold = fold;
        rec.metrics = compute_metrics(truth, pred, n_classes);
        records.push_back(rec);
    }
    return records;
}

std::string theta_str(double theta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", theta);
    return buf;
}

void append_metrics(std::string& out, const Metrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f", m.accuracy, m.precision, m.recall,
                  m.f1);
    out += buf;
}

}  // namespace

ExperimentReport run_experiment(const Hsn& input, const ExperimentConfig& cfg) {
    if (cfg.theta_grid.empty()) throw UsageError("run_experiment: empty theta grid");
    if (cfg.parallel < 1) throw UsageError("run_experiment: parallel must be at least 1");

    Hsn hsn = input;
    derive_entity_labels(hsn);

    std::vector<TaskMode> modes;
    if (cfg.modes != EvalModes::Multi) modes.push_back(TaskMode::Bi);
    if (cfg.modes != EvalModes::Bi) modes.push_back(TaskMode::Multi);

    // Folds depend only on (k, seed); theta just widens the sampled training
    // sets, so one split per theta keeps fold membership aligned across the
    // grid.
    std::vector<Split> splits;
    splits.reserve(cfg.theta_grid.size());
    for (double theta : cfg.theta_grid)
        splits.push_back(split_folds(hsn, cfg.k, theta, cfg.model.seed));

    struct Job {
        std::size_t theta_index;
        int fold;
        TaskMode mode;
    };
    std::vector<Job> jobs;
    for (std::size_t ti = 0; ti < cfg.theta_grid.size(); ++ti)
        for (int fold = 0; fold < cfg.k; ++fold)
            for (TaskMode mode : modes) jobs.push_back({ti, fold, mode});

    std::vector<std::vector<MetricRecord>> results(jobs.size());
    std::vector<std::exception_ptr> failures(jobs.size());
    auto run_job = [&](std::size_t j) {
        const Job& job = jobs[j];
        try {
            results[j] = run_cell(hsn, splits[job.theta_index], job.theta_index,
                                  cfg.theta_grid[job.theta_index], job.fold, job.mode, cfg);
        } catch (...) {
            failures[j] = std::current_exception();
        }
    };

    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.parallel), jobs.size());
    if (workers <= 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1))
                    run_job(j);
            });
        for (auto& t : pool) t.join();
    }

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!failures[j]) continue;
        const Job& job = jobs[j];
        std::string ctx = "theta " + theta_str(cfg.theta_grid[job.theta_index]) + " fold " +
                          std::to_string(job.fold) + " (" + mode_name(job.mode) + "): ";
        try {
            std::rethrow_exception(failures[j]);
        } catch (const TrainError& e) {
            throw TrainError(ctx + e.what());
        } catch (const LoadError& e) {
            throw LoadError(ctx + e.what());
        } catch (const UsageError& e) {
            throw UsageError(ctx + e.what());
        } catch (const std::exception& e) {
            throw TrainError(ctx + e.what());
        }
    }

    ExperimentReport report;
    for (const auto& cell : results)
        report.records.insert(report.records.end(), cell.begin(), cell.end());
    return report;
}

std::string report_csv(const ExperimentReport& report) {
    std::string out = "mode,node_type,theta,fold,accuracy,precision,recall,f1\n";
    for (const auto& r : report.records) {
        out += mode_name(r.mode) + "," + node_type_name(r.node_type) + "," +
               theta_str(r.theta) + "," + std::to_string(r.fold) + ",";
        append_metrics(out, r.metrics);
        out += "\n";
    }
    return out;
}

std::string report_means_csv(const ExperimentReport& report) {
    struct Group {
        TaskMode mode;
        NodeType node_type;
        double theta;
        Metrics sum;
        std::size_t folds = 0;
    };
    std::vector<Group> groups;
    for (const auto& r : report.records) {
        Group* g = nullptr;
        for (auto& cand : groups)
            if (cand.mode == r.mode && cand.node_type == r.node_type && cand.theta == r.theta) {
                g = &cand;
                break;
            }
        if (!g) {
            groups.push_back({r.mode, r.node_type, r.theta, {}, 0});
            g = &groups.back();
        }
        g->sum.accuracy += r.metrics.accuracy;
        g->sum.precision += r.metrics.precision;
        g->sum.recall += r.metrics.recall;
        g->sum.f1 += r.metrics.f1;
        g->folds++;
    }
    std::string out = "mode,node_type,theta,folds,accuracy,precision,recall,f1\n";
    for (const auto& g : groups) {
        double n = static_cast<double>(g.folds);
        out += mode_name(g.mode) + "," + node_type_name(g.node_type) + "," +
               theta_str(g.theta) + "," + std::to_string(g.folds) + ",";
        append_metrics(out, {g.sum.accuracy / n, g.sum.precision / n, g.sum.recall / n,
                             g.sum.f1 / n});
        out += "\n";
    }
    return out;
}

void write_report(const ExperimentReport& report, const std::string& dir) {
    for (const auto& [name, text] :
         {std::pair<std::string, std::string>{"report.csv", report_csv(report)},
          {"report_means.csv", report_means_csv(report)}}) {
        std::ofstream out(dir + "/" + name);
        if (!out) throw UsageError("cannot write " + dir + "/" + name);
        out << text;
    }
}

}  // namespace newscred
