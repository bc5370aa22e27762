#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "newscred/features.hpp"
#include "newscred/gdu.hpp"
#include "newscred/hsn.hpp"

namespace newscred {

enum class TaskMode { Bi, Multi };
enum class NodeType { Article = 0, Creator = 1, Subject = 2 };

const std::string& mode_name(TaskMode m);
const std::string& node_type_name(NodeType t);

struct ModelConfig {
    std::size_t d = 200;          // discriminative words per category
    std::size_t e_dim = 64;       // token embedding width
    std::size_t hidden_dim = 64;  // GRU state width
    std::size_t latent_dim = 64;  // fused latent feature width
    std::size_t state_dim = 64;   // diffusive state width
    std::size_t q = 48;           // encoded text length
    int rounds = 2;               // diffusion rounds
    double alpha = 1e-4;          // L2 coefficient (weights only)
    double lr = 0.05;
    double momentum = 0.0;
    int epochs = 200;
    TaskMode mode = TaskMode::Multi;
    bool bi_from_multi = false;  // bi mode via a 6-way head mapped at eval
    bool text_only = false;      // ablation: neighbor ports zeroed
    std::uint64_t seed = 1;
    TokenizerConfig tokenizer;

    // 2 for a native bi head, 6 otherwise.
    std::size_t head_classes() const;
};

// All trainable state plus the structural numbers needed to reload it.
struct ModelParams {
    std::size_t vocab_tokens = 0;
    std::size_t n_classes = 6;
    std::size_t d = 0, e_dim = 0, hidden_dim = 0, latent_dim = 0, state_dim = 0, q = 0;
    int rounds = 0;
    std::uint64_t seed = 0;

    std::array<HfluParams, 3> hflu;  // indexed by NodeType
    std::array<GduParams, 3> gdu;
    std::array<Tensor, 3> head_w, head_b;

    ModelParams tracked(Tape& tape) const;
    GduStack gdu_stack() const { return {gdu[0], gdu[1], gdu[2]}; }
};

enum class ParamKind { Weight, Bias, Embedding };

// Visits every parameter tensor in a fixed order (also the checkpoint order).
void for_each_param(
    const ModelParams& p,
    const std::function<void(const std::string&, const Tensor&, ParamKind)>& fn);
std::vector<Tensor> param_values(const ModelParams& p);
// Rebuilds a structurally identical ModelParams with the given tensors, in
// for_each_param order.
ModelParams with_values(const ModelParams& like, const std::vector<Tensor>& values);

ModelParams init_model(const ModelConfig& cfg, std::size_t vocab_tokens);

// Flat little-endian binary checkpoint; reload restores bit-identical
// inference.
void save_model(const ModelParams& p, const std::string& path);
ModelParams load_model(const std::string& path);

// Tokenizes and encodes every node text once; per epoch only the latent
// parts are re-run against current parameters.
class FeatureBank {
public:
    FeatureBank(const Hsn& hsn, const Vocab& vocab, const ModelConfig& cfg);
    NodeTensors combined(Tape* tape, const ModelParams& p) const;

private:
    struct Entry {
        Tensor explicit_part;
        EncodedText enc;
    };
    std::map<std::string, Entry> articles_, creators_, subjects_;
};

// Class index of a label under a head with the given class count.
std::size_t head_class_index(std::size_t n_classes, CredLabel label);

// Softmax class probabilities for the listed nodes of one category. Every id
// must have a diffused state.
std::map<std::string, Tensor> predict(Tape* tape, const ModelParams& p,
                                      const DiffusionState& st, NodeType type,
                                      const std::vector<std::string>& ids);

struct LossBreakdown {
    Tensor total;
    double data = 0.0;     // summed cross entropy
    double reg_raw = 0.0;  // sum of squared weights, before alpha
};

// Cross entropy over the sampled training nodes of all three categories plus
// alpha * sum of squared weight entries (biases and the embedding padding row
// excluded). Only the listed training labels are read.
LossBreakdown training_loss(Tape* tape, const ModelParams& p, const Hsn& hsn,
                            const TrainIds& train, const DiffusionState& st, double alpha);

struct FoldData {
    TrainIds train;  // sampled training ids
    TrainIds test;
};
FoldData fold_data(const Split& split, int fold);

struct TraceRow {
    int epoch = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct FitResult {
    ModelParams params;
    std::vector<TraceRow> trace;
};

// Full-batch gradient descent. Each epoch rebuilds the tape: latent features,
// diffusion, loss; a non-finite loss or gradient aborts with TrainError.
FitResult fit(const Hsn& hsn, const Vocab& vocab, const FoldData& fold, const ModelConfig& cfg);

// Tape-free forward pass for a trained model.
DiffusionState infer_states(const Hsn& hsn, const Vocab& vocab, const ModelParams& p,
                            const ModelConfig& cfg);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace newscred
