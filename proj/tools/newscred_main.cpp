#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "newscred/errors.hpp"
#include "newscred/eval.hpp"
#include "newscred/gradcheck.hpp"
#include "newscred/hsn.hpp"
#include "newscred/stats.hpp"
#include "newscred/synth.hpp"

using namespace newscred;

namespace {

std::string trimmed(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    auto end = s.find_last_not_of(" \t\r");
    return begin == std::string::npos ? "" : s.substr(begin, end - begin + 1);
}

// Expands `--config FILE` into `--key=value` tokens inserted ahead of the
// explicit flags, so the command line wins (every option takes the last
// value). Lines are `key=value`; blank lines and # comments are skipped.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string file;
        std::size_t width = 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            file = args[i + 1];
            width = 2;
        } else if (args[i].rfind("--config=", 0) == 0) {
            file = args[i].substr(9);
            width = 1;
        }
        if (width == 0) continue;

        std::ifstream in(file);
        if (!in) throw UsageError("cannot read config file " + file);
        std::vector<std::string> injected;
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string entry = trimmed(line);
            if (entry.empty() || entry[0] == '#') continue;
            auto eq = entry.find('=');
            std::string key = eq == std::string::npos ? "" : trimmed(entry.substr(0, eq));
            if (key.empty())
                throw UsageError(file + ":" + std::to_string(lineno) + ": expected key=value");
            injected.push_back("--" + key + "=" + trimmed(entry.substr(eq + 1)));
        }
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                   args.begin() + static_cast<std::ptrdiff_t>(i + width));
        // after the subcommand, before the user's flags
        args.insert(args.begin() + (args.empty() ? 0 : 1), injected.begin(), injected.end());
        break;
    }
    return args;
}

Hsn load_dir(const std::string& dir) {
    return load_hsn(dir + "/articles.jsonl", dir + "/creators.jsonl", dir + "/subjects.jsonl",
                    dir + "/edges.jsonl");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create directory " + dir + ": " + ec.message());
}

// Hyperparameters shared by train and eval. Option names double as the keys
// accepted in --config files.
void add_model_flags(CLI::App* cmd, ModelConfig& mc) {
    cmd->add_option("--d", mc.d, "discriminative words per category")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--e-dim", mc.e_dim, "token embedding width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--hidden-dim", mc.hidden_dim, "GRU state width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--latent-dim", mc.latent_dim, "fused latent width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--state-dim", mc.state_dim, "diffusive state width")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--q", mc.q, "encoded text length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--rounds", mc.rounds, "diffusion rounds K")
        ->check(CLI::Range(1, 64))
        ->capture_default_str();
    cmd->add_option("--alpha", mc.alpha, "L2 coefficient")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--lr", mc.lr, "learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--momentum", mc.momentum, "momentum coefficient")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--epochs", mc.epochs, "training epochs")
        ->check(CLI::Range(1, 1000000))
        ->capture_default_str();
    cmd->add_flag("--bi-from-multi", mc.bi_from_multi,
                  "bi mode scores a 6-way head collapsed to polarity");
    cmd->add_flag("--text-only", mc.text_only, "ablation: zero the neighbor ports");
    cmd->add_option("--seed", mc.seed, "master seed")->capture_default_str();
}

TaskMode parse_mode(const std::string& name) {
    return name == "bi" ? TaskMode::Bi : TaskMode::Multi;
}

int cmd_ingest(const std::string& articles, const std::string& creators,
               const std::string& subjects, const std::string& edges) {
    Hsn hsn = load_hsn(articles, creators, subjects, edges);
    std::printf("articles %zu\n", hsn.articles.size());
    std::printf("creators %zu\n", hsn.creators.size());
    std::printf("subjects %zu\n", hsn.subjects.size());
    std::printf("article-subject links %zu\n", hsn.subject_link_count());
    std::size_t counts[6] = {};
    for (const auto& [id, a] : hsn.articles) counts[static_cast<std::size_t>(a.label)]++;
    for (std::size_t i = 0; i < 6; ++i)
        std::printf("label %s %zu\n", label_name(static_cast<CredLabel>(i)).c_str(), counts[i]);
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
    ensure_dir(out);
    SynthResult result = generate_synthetic(spec);
    write_hsn(result.hsn, out);
    std::printf("wrote %zu articles, %zu creators, %zu subjects to %s\n",
                result.hsn.articles.size(), result.hsn.creators.size(),
                result.hsn.subjects.size(), out.c_str());
    std::printf("expected positive rate %.4f\n", result.expected_positive_rate);
    return 0;
}

int cmd_stats(const std::string& data, const std::string& out, std::size_t top_words) {
    Hsn hsn = load_dir(data);
    StatsReport report = stats(hsn, top_words);
    ensure_dir(out);
    write_stats_csv(report, out);
    std::printf("articles %zu (true %zu / false %zu)\n", report.n_articles,
                report.true_articles, report.false_articles);
    std::printf("creators %zu subjects %zu links %zu\n", report.n_creators, report.n_subjects,
                report.n_subject_links);
    if (report.power_law_slope)
        std::printf("power-law slope %.4f\n", *report.power_law_slope);
    std::printf("reports in %s\n", out.c_str());
    return 0;
}

int cmd_train(const std::string& data, double theta, int fold, int k, const std::string& mode,
              const std::string& out, ModelConfig mc) {
    mc.mode = parse_mode(mode);
    Hsn hsn = load_dir(data);
    derive_entity_labels(hsn);
    Split split = split_folds(hsn, k, theta, mc.seed);
    FoldData fd = fold_data(split, fold);
    Vocab vocab = build_vocab(hsn, fd.train, mc.d, mc.tokenizer);
    FitResult result = fit(hsn, vocab, fd, mc);
    ensure_dir(out);
    save_model(result.params, out + "/model.bin");
    save_vocab(vocab, out + "/vocab.txt");
    write_trace_csv(result.trace, out + "/trace.csv");
    std::printf("epoch %d loss %.6f grad %.6f\n", result.trace.back().epoch,
                result.trace.back().loss, result.trace.back().grad_norm);
    std::printf("checkpoint in %s\n", out.c_str());
    return 0;
}

int cmd_eval(const std::string& data, const ExperimentConfig& cfg, const std::string& out) {
    Hsn hsn = load_dir(data);
    derive_entity_labels(hsn);
    ExperimentReport report = run_experiment(hsn, cfg);
    ensure_dir(out);
    write_report(report, out);
    std::printf("%zu records in %s\n", report.records.size(), out.c_str());
    return 0;
}

int cmd_gradcheck(double step) {
    GradCheckReport report = run_gradcheck(step);
    for (const auto& c : report.cases)
        std::printf("%-12s seed %llu  max rel err %.3e\n", c.name.c_str(),
                    static_cast<unsigned long long>(c.seed), c.max_rel_err);
    std::printf("max relative error %.3e\n", report.max_rel_err);
    return report.max_rel_err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"credibility inference over an article/creator/subject network"};
    app.require_subcommand(1);
    // repeated options take the last value, so config entries lose to flags
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    int status = 0;
    std::string config_note;  // consumed by expand_config before parsing

    auto* ingest = app.add_subcommand("ingest", "validate and summarize a dataset");
    auto ingest_files = std::make_shared<std::array<std::string, 4>>();
    ingest->add_option("--articles", (*ingest_files)[0], "articles JSONL")->required();
    ingest->add_option("--creators", (*ingest_files)[1], "creators JSONL")->required();
    ingest->add_option("--subjects", (*ingest_files)[2], "subjects JSONL")->required();
    ingest->add_option("--edges", (*ingest_files)[3], "edges JSONL")->required();
    ingest->add_option("--config", config_note, "key=value config file (flags override)");
    ingest->callback([&, ingest_files] {
        status = cmd_ingest((*ingest_files)[0], (*ingest_files)[1], (*ingest_files)[2],
                            (*ingest_files)[3]);
    });

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto synth_spec = std::make_shared<SynthSpec>();
    auto synth_out = std::make_shared<std::string>();
    synth->add_option("--out", *synth_out, "output directory")->required();
    synth->add_option("--articles", synth_spec->n_articles, "article count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--creators", synth_spec->n_creators, "creator count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--subjects", synth_spec->n_subjects, "subject count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--strength", synth_spec->signal_strength, "planted signal strength")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    synth->add_option("--seed", synth_spec->seed, "generator seed")->capture_default_str();
    synth->add_option("--vocab-size", synth_spec->vocab_size, "distinct tokens")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--markers", synth_spec->n_markers, "per-polarity marker tokens")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--config", config_note, "key=value config file (flags override)");
    synth->callback([&, synth_spec, synth_out] { status = cmd_synth(*synth_spec, *synth_out); });

    auto* stats_cmd = app.add_subcommand("stats", "dataset statistics reports");
    auto stats_args = std::make_shared<std::tuple<std::string, std::string, std::size_t>>(
        "", "", std::size_t{25});
    stats_cmd->add_option("--data", std::get<0>(*stats_args), "dataset directory")->required();
    stats_cmd->add_option("--out", std::get<1>(*stats_args), "report directory")->required();
    stats_cmd->add_option("--top-words", std::get<2>(*stats_args), "contrast words per side")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    stats_cmd->add_option("--config", config_note, "key=value config file (flags override)");
    stats_cmd->callback([&, stats_args] {
        status = cmd_stats(std::get<0>(*stats_args), std::get<1>(*stats_args),
                           std::get<2>(*stats_args));
    });

    auto* train = app.add_subcommand("train", "fit one (theta, fold) cell");
    struct TrainArgs {
        std::string data, out, mode = "multi";
        double theta = 1.0;
        int fold = 0;
        int k = 10;
        ModelConfig mc;
    };
    auto train_args = std::make_shared<TrainArgs>();
    train->add_option("--data", train_args->data, "dataset directory")->required();
    train->add_option("--out", train_args->out, "output directory")->required();
    train->add_option("--theta", train_args->theta, "training sampling ratio")
        ->check(CLI::PositiveNumber & CLI::Range(1.0))
        ->capture_default_str();
    train->add_option("--fold", train_args->fold, "held-out fold index")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train->add_option("--folds", train_args->k, "fold count k")
        ->check(CLI::Range(2, 1000))
        ->capture_default_str();
    train->add_option("--mode", train_args->mode, "label space")
        ->check(CLI::IsMember({"bi", "multi"}))
        ->capture_default_str();
    add_model_flags(train, train_args->mc);
    train->add_option("--config", config_note, "key=value config file (flags override)");
    train->callback([&, train_args] {
        status = cmd_train(train_args->data, train_args->theta, train_args->fold, train_args->k,
                           train_args->mode, train_args->out, train_args->mc);
    });

    auto* eval = app.add_subcommand("eval", "cross-validated theta sweep");
    struct EvalArgs {
        std::string data, out, mode = "both";
        ExperimentConfig cfg;
    };
    auto eval_args = std::make_shared<EvalArgs>();
    eval->add_option("--data", eval_args->data, "dataset directory")->required();
    eval->add_option("--out", eval_args->out, "report directory")->required();
    eval->add_option("--theta-grid", eval_args->cfg.theta_grid, "comma-separated ratios")
        ->delimiter(',')
        ->check(CLI::PositiveNumber & CLI::Range(1.0))
        ->capture_default_str();
    eval->add_option("--folds", eval_args->cfg.k, "fold count k")
        ->check(CLI::Range(2, 1000))
        ->capture_default_str();
    eval->add_option("--mode", eval_args->mode, "bi, multi, or both")
        ->check(CLI::IsMember({"bi", "multi", "both"}))
        ->capture_default_str();
    eval->add_option("--parallel", eval_args->cfg.parallel, "concurrent (theta, fold) cells")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();
    add_model_flags(eval, eval_args->cfg.model);
    eval->add_option("--config", config_note, "key=value config file (flags override)");
    eval->callback([&, eval_args] {
        eval_args->cfg.modes = eval_args->mode == "both" ? EvalModes::Both
                               : eval_args->mode == "bi" ? EvalModes::Bi
                                                         : EvalModes::Multi;
        status = cmd_eval(eval_args->data, eval_args->cfg, eval_args->out);
    });

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    auto gc_step = std::make_shared<double>(1e-5);
    gradcheck->add_option("--step", *gc_step, "central-difference step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gradcheck->callback([&, gc_step] { status = cmd_gradcheck(*gc_step); });

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help and friends
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        std::fprintf(stderr, "run with --help for usage\n");
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const LoadError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const TrainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return status;
}
