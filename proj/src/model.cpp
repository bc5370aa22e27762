#include "newscred/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "newscred/errors.hpp"
#include "newscred/eval.hpp"

namespace newscred {

namespace {

const std::array<std::string, 2> kModeNames = {"bi", "multi"};
const std::array<std::string, 3> kTypeNames = {"article", "creator", "subject"};

struct ParamRef {
    std::string name;
    ParamKind kind;
    Tensor* tensor;
};

std::vector<ParamRef> param_refs(ModelParams& p) {
    std::vector<ParamRef> refs;
    refs.reserve(54);
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string& t = kTypeNames[i];
        HfluParams& h = p.hflu[i];
        GduParams& g = p.gdu[i];
        refs.push_back({t + ".embedding", ParamKind::Embedding, &h.embedding});
        refs.push_back({t + ".gru.w_update", ParamKind::Weight, &h.gru.w_update});
        refs.push_back({t + ".gru.w_reset", ParamKind::Weight, &h.gru.w_reset});
        refs.push_back({t + ".gru.w_cand", ParamKind::Weight, &h.gru.w_cand});
        refs.push_back({t + ".gru.b_update", ParamKind::Bias, &h.gru.b_update});
        refs.push_back({t + ".gru.b_reset", ParamKind::Bias, &h.gru.b_reset});
        refs.push_back({t + ".gru.b_cand", ParamKind::Bias, &h.gru.b_cand});
        refs.push_back({t + ".fuse.w", ParamKind::Weight, &h.w_fuse});
        refs.push_back({t + ".fuse.b", ParamKind::Bias, &h.b_fuse});
        refs.push_back({t + ".gdu.w_forget", ParamKind::Weight, &g.w_forget});
        refs.push_back({t + ".gdu.w_adjust", ParamKind::Weight, &g.w_adjust});
        refs.push_back({t + ".gdu.w_select_g", ParamKind::Weight, &g.w_select_g});
        refs.push_back({t + ".gdu.w_select_r", ParamKind::Weight, &g.w_select_r});
        refs.push_back({t + ".gdu.w_combine", ParamKind::Weight, &g.w_combine});
        refs.push_back({t + ".gdu.b_forget", ParamKind::Bias, &g.b_forget});
        refs.push_back({t + ".gdu.b_adjust", ParamKind::Bias, &g.b_adjust});
        refs.push_back({t + ".gdu.b_select_g", ParamKind::Bias, &g.b_select_g});
        refs.push_back({t + ".gdu.b_select_r", ParamKind::Bias, &g.b_select_r});
        refs.push_back({t + ".gdu.b_combine", ParamKind::Bias, &g.b_combine});
        refs.push_back({t + ".head.w", ParamKind::Weight, &p.head_w[i]});
        refs.push_back({t + ".head.b", ParamKind::Bias, &p.head_b[i]});
    }
    return refs;
}

}  // namespace

const std::string& mode_name(TaskMode m) { return kModeNames[static_cast<std::size_t>(m)]; }
const std::string& node_type_name(NodeType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

std::size_t ModelConfig::head_classes() const {
    return (mode == TaskMode::Bi && !bi_from_multi) ? 2 : static_cast<std::size_t>(kNumClasses);
}

ModelParams ModelParams::tracked(Tape& tape) const {
    ModelParams t = *this;
    for (std::size_t i = 0; i < 3; ++i) {
        t.hflu[i] = hflu[i].tracked(tape);
        t.gdu[i] = gdu[i].tracked(tape);
        t.head_w[i] = tape.track(head_w[i]);
        t.head_b[i] = tape.track(head_b[i]);
    }
    return t;
}

void for_each_param(
    const ModelParams& p,
    const std::function<void(const std::string&, const Tensor&, ParamKind)>& fn) {
    auto refs = param_refs(const_cast<ModelParams&>(p));
    for (const auto& r : refs) fn(r.name, *r.tensor, r.kind);
}

std::vector<Tensor> param_values(const ModelParams& p) {
    std::vector<Tensor> out;
    for_each_param(p, [&](const std::string&, const Tensor& t, ParamKind) { out.push_back(t); });
    return out;
}

ModelParams with_values(const ModelParams& like, const std::vector<Tensor>& values) {
    ModelParams out = like;
    auto refs = param_refs(out);
    if (values.size() != refs.size())
        throw UsageError("with_values: expected " + std::to_string(refs.size()) + " tensors, got " +
                         std::to_string(values.size()));
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (values[i].shape() != refs[i].tensor->shape())
            throw DimensionError("with_values: " + refs[i].name + " expects shape " +
                                 shape_str(refs[i].tensor->shape()) + ", got " +
                                 shape_str(values[i].shape()));
        *refs[i].tensor = values[i];
    }
    return out;
}

ModelParams init_model(const ModelConfig& cfg, std::size_t vocab_tokens) {
    ModelParams p;
    p.vocab_tokens = vocab_tokens;
    p.n_classes = cfg.head_classes();
    p.d = cfg.d;
    p.e_dim = cfg.e_dim;
    p.hidden_dim = cfg.hidden_dim;
    p.latent_dim = cfg.latent_dim;
    p.state_dim = cfg.state_dim;
    p.q = cfg.q;
    p.rounds = cfg.rounds;
    p.seed = cfg.seed;
    const std::size_t in_dim = cfg.d + cfg.latent_dim;
    Rng root(cfg.seed);
    for (std::size_t i = 0; i < 3; ++i) {
        Rng rng = root.child("init." + kTypeNames[i]);
        p.hflu[i] = init_hflu(vocab_tokens, cfg.e_dim, cfg.hidden_dim, cfg.latent_dim, rng);
        p.gdu[i] = init_gdu(in_dim, cfg.state_dim, rng);
        double s = std::sqrt(6.0 / static_cast<double>(p.n_classes + cfg.state_dim));
        p.head_w[i] = Tensor::uniform({p.n_classes, cfg.state_dim}, -s, s, rng);
        p.head_b[i] = Tensor::zeros({p.n_classes});
    }
    return p;
}

namespace {

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) throw LoadError(path + ": truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void put_doubles(std::ofstream& out, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        put_u64(out, bits);
    }
}

constexpr std::uint64_t kCheckpointMagic = 0x304b43444552434eULL;  // "NCREDCK0"

}  // namespace

void save_model(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write checkpoint " + path);
    put_u64(out, kCheckpointMagic);
    for (std::uint64_t v : {static_cast<std::uint64_t>(p.vocab_tokens),
                            static_cast<std::uint64_t>(p.n_classes),
                            static_cast<std::uint64_t>(p.d), static_cast<std::uint64_t>(p.e_dim),
                            static_cast<std::uint64_t>(p.hidden_dim),
                            static_cast<std::uint64_t>(p.latent_dim),
                            static_cast<std::uint64_t>(p.state_dim),
                            static_cast<std::uint64_t>(p.q),
                            static_cast<std::uint64_t>(p.rounds), p.seed})
        put_u64(out, v);
    for_each_param(p, [&](const std::string&, const Tensor& t, ParamKind) {
        put_doubles(out, t.values());
    });
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path + ": cannot open");
    if (get_u64(in, path) != kCheckpointMagic)
        throw LoadError(path + ": not a model checkpoint");
    ModelConfig cfg;
    std::uint64_t vocab_tokens = get_u64(in, path);
    std::uint64_t n_classes = get_u64(in, path);
    cfg.d = get_u64(in, path);
    cfg.e_dim = get_u64(in, path);
    cfg.hidden_dim = get_u64(in, path);
    cfg.latent_dim = get_u64(in, path);
    cfg.state_dim = get_u64(in, path);
    cfg.q = get_u64(in, path);
    cfg.rounds = static_cast<int>(get_u64(in, path));
    cfg.seed = get_u64(in, path);
    cfg.mode = n_classes == 2 ? TaskMode::Bi : TaskMode::Multi;
    ModelParams p = init_model(cfg, vocab_tokens);
    if (p.n_classes != n_classes) throw LoadError(path + ": inconsistent class count");
    auto refs = param_refs(p);
    for (auto& r : refs) {
        std::vector<double> v(r.tensor->numel());
        for (auto& d : v) {
            std::uint64_t bits = get_u64(in, path);
            std::memcpy(&d, &bits, 8);
        }
        *r.tensor = Tensor(r.tensor->shape(), std::move(v));
    }
    char extra;
    if (in.read(&extra, 1)) throw LoadError(path + ": trailing bytes after parameters");
    return p;
}

FeatureBank::FeatureBank(const Hsn& hsn, const Vocab& vocab, const ModelConfig& cfg) {
    for (const auto& [id, a] : hsn.articles)
        articles_[id] = {explicit_features(a.text, vocab.article_words, cfg.tokenizer),
                         encode_text(a.text, vocab, cfg.q, cfg.tokenizer)};
    for (const auto& [id, c] : hsn.creators)
        creators_[id] = {explicit_features(c.profile, vocab.creator_words, cfg.tokenizer),
                         encode_text(c.profile, vocab, cfg.q, cfg.tokenizer)};
    for (const auto& [id, s] : hsn.subjects)
        subjects_[id] = {explicit_features(s.description, vocab.subject_words, cfg.tokenizer),
                         encode_text(s.description, vocab, cfg.q, cfg.tokenizer)};
}

NodeTensors FeatureBank::combined(Tape* tape, const ModelParams& p) const {
    NodeTensors out;
    auto run = [&](const std::map<std::string, Entry>& entries, const HfluParams& hp,
                   std::map<std::string, Tensor>& dst) {
        for (const auto& [id, e] : entries) {
            auto latent = latent_features(tape, e.enc, hp);
            dst.emplace(id, concat(tape, {e.explicit_part, latent}));
        }
    };
    run(articles_, p.hflu[0], out.articles);
    run(creators_, p.hflu[1], out.creators);
    run(subjects_, p.hflu[2], out.subjects);
    return out;
}

std::size_t head_class_index(std::size_t n_classes, CredLabel label) {
    if (n_classes == 2)
        return to_polarity(label) == Polarity::Positive ? 0 : 1;
    return static_cast<std::size_t>(label);
}

std::map<std::string, Tensor> predict(Tape* tape, const ModelParams& p, const DiffusionState& st,
                                      NodeType type, const std::vector<std::string>& ids) {
    const std::size_t i = static_cast<std::size_t>(type);
    const auto& states = type == NodeType::Article   ? st.states.articles
                         : type == NodeType::Creator ? st.states.creators
                                                     : st.states.subjects;
    std::map<std::string, Tensor> out;
    for (const auto& id : ids) {
        auto it = states.find(id);
        if (it == states.end())
            throw UsageError("predict: no diffused state for " + kTypeNames[i] + " \"" + id +
                             "\"");
        out.emplace(id, softmax(tape, affine(tape, p.head_w[i], it->second, p.head_b[i])));
    }
    return out;
}

LossBreakdown training_loss(Tape* tape, const ModelParams& p, const Hsn& hsn,
                            const TrainIds& train, const DiffusionState& st, double alpha) {
    std::vector<Tensor> terms;
    auto add_terms = [&](NodeType type, const std::vector<std::string>& ids) {
        auto probs = predict(tape, p, st, type, ids);
        for (const auto& id : ids) {
            CredLabel label;
            if (type == NodeType::Article) {
                label = hsn.articles.at(id).label;
            } else if (type == NodeType::Creator) {
                const auto& l = hsn.creators.at(id).label;
                if (!l) throw UsageError("training_loss: creator \"" + id + "\" has no label");
                label = *l;
            } else {
                const auto& l = hsn.subjects.at(id).label;
                if (!l) throw UsageError("training_loss: subject \"" + id + "\" has no label");
                label = *l;
            }
            terms.push_back(cross_entropy(tape, probs.at(id),
                                          one_hot(p.n_classes, head_class_index(p.n_classes,
                                                                                label))));
        }
    };
    add_terms(NodeType::Article, train.articles);
    add_terms(NodeType::Creator, train.creators);
    add_terms(NodeType::Subject, train.subjects);
    if (terms.empty()) throw UsageError("training_loss: no training nodes");
    Tensor data = sum_of(tape, terms);

    std::vector<Tensor> reg_terms;
    ModelParams& mp = const_cast<ModelParams&>(p);
    for (const auto& r : param_refs(mp)) {
        if (r.kind == ParamKind::Weight)
            reg_terms.push_back(sum_squares(tape, *r.tensor));
        else if (r.kind == ParamKind::Embedding)  // padding row excluded
            reg_terms.push_back(sum_squares(tape, *r.tensor, r.tensor->cols()));
    }
    Tensor reg = sum_of(tape, reg_terms);

    LossBreakdown lb;
    lb.data = data.item();
    lb.reg_raw = reg.item();
    lb.total = add(tape, data, scale(tape, alpha, reg));
    return lb;
}

FoldData fold_data(const Split& split, int fold) {
    if (fold < 0 || fold >= split.k)
        throw UsageError("fold_data: fold " + std::to_string(fold) + " outside 0.." +
                         std::to_string(split.k - 1));
    FoldData fd;
    fd.train = {split.articles.sampled_train[fold], split.creators.sampled_train[fold],
                split.subjects.sampled_train[fold]};
    fd.test = {split.articles.folds[fold], split.creators.folds[fold],
               split.subjects.folds[fold]};
    return fd;
}

FitResult fit(const Hsn& hsn, const Vocab& vocab, const FoldData& fold, const ModelConfig& cfg) {
    if (cfg.epochs < 1) throw UsageError("fit: epochs must be at least 1");
    FeatureBank bank(hsn, vocab, cfg);
    ModelParams params = init_model(cfg, vocab.tokens.size());

    auto refs = param_refs(params);
    std::vector<std::vector<double>> velocity(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i)
        velocity[i].assign(refs[i].tensor->numel(), 0.0);

    FitResult result;
    result.trace.reserve(cfg.epochs);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Tape tape;
        ModelParams tracked = params.tracked(tape);
        NodeTensors feats = bank.combined(&tape, tracked);
        DiffusionState st =
            diffuse(&tape, hsn, feats, tracked.gdu_stack(), cfg.rounds, cfg.text_only);
        LossBreakdown lb = training_loss(&tape, tracked, hsn, fold.train, st, cfg.alpha);

        double loss = lb.total.item();
        auto param_norm = [&]() {
            double sq = 0.0;
            for (const auto& r : param_refs(params))
                for (double v : r.tensor->values()) sq += v * v;
            return std::sqrt(sq);
        };
        if (!std::isfinite(loss))
            throw TrainError("non-finite loss at epoch " + std::to_string(epoch) +
                             " (parameter norm " + std::to_string(param_norm()) + ")");
        tape.backward(lb.total);

        auto tracked_refs = param_refs(tracked);
        double grad_sq = 0.0;
        for (const auto& r : tracked_refs) {
            const Tensor g = tape.grad(*r.tensor);
            for (double v : g.values()) grad_sq += v * v;
        }
        double grad_norm = std::sqrt(grad_sq);
        if (!std::isfinite(grad_norm))
            throw TrainError("non-finite gradient at epoch " + std::to_string(epoch) +
                             " (parameter norm " + std::to_string(param_norm()) + ")");

        for (std::size_t i = 0; i < refs.size(); ++i) {
            const Tensor g = tape.grad(*tracked_refs[i].tensor);
            std::vector<double> next = refs[i].tensor->values();
            auto& vel = velocity[i];
            for (std::size_t j = 0; j < next.size(); ++j) {
                vel[j] = cfg.momentum * vel[j] + g.values()[j];
                next[j] -= cfg.lr * vel[j];
            }
            *refs[i].tensor = Tensor(refs[i].tensor->shape(), std::move(next));
        }
        result.trace.push_back({epoch, loss, grad_norm});
    }
    result.params = std::move(params);
    return result;
}

DiffusionState infer_states(const Hsn& hsn, const Vocab& vocab, const ModelParams& p,
                            const ModelConfig& cfg) {
    FeatureBank bank(hsn, vocab, cfg);
    NodeTensors feats = bank.combined(nullptr, p);
    return diffuse(nullptr, hsn, feats, p.gdu_stack(), cfg.rounds, cfg.text_only);
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write trace " + path);
    out << "epoch,loss,grad_norm\n";
    char buf[96];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", row.epoch, row.loss, row.grad_norm);
        out << buf;
    }
}

}  // namespace newscred
