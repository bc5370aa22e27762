#include "newscred/gradcheck.hpp"

#include <algorithm>

#include "newscred/features.hpp"
#include "newscred/gdu.hpp"
#include "newscred/model.hpp"
#include "newscred/rng.hpp"
#include "newscred/tensor.hpp"

namespace newscred {

namespace {

Tensor draw(Shape shape, Rng& rng) { return Tensor::uniform(std::move(shape), -0.8, 0.8, rng); }

double check_gru_step(std::uint64_t seed, double step) {
    Rng rng(seed);
    Rng child = rng.child("gradcheck.gru");
    const std::size_t e = 3, h = 2;
    GruParams g;
    g.w_update = draw({h, e + h}, child);
    g.w_reset = draw({h, e + h}, child);
    g.w_cand = draw({h, e + h}, child);
    g.b_update = draw({h}, child);
    g.b_reset = draw({h}, child);
    g.b_cand = draw({h}, child);
    std::vector<CheckedParam> params = {
        {"w_update", g.w_update}, {"w_reset", g.w_reset}, {"w_cand", g.w_cand},
        {"b_update", g.b_update}, {"b_reset", g.b_reset}, {"b_cand", g.b_cand},
        {"x", draw({e}, child)},  {"h_prev", draw({h}, child)},
    };
    LossFn fn = [](Tape* tape, const std::vector<Tensor>& v) {
        GruParams p{v[0], v[1], v[2], v[3], v[4], v[5]};
        return sum_squares(tape, gru_step(tape, p, v[6], v[7]));
    };
    return finite_diff_check(fn, params, step);
}

double check_latent(std::uint64_t seed, double step) {
    Rng rng(seed);
    Rng child = rng.child("gradcheck.latent");
    HfluParams h = init_hflu(/*vocab_tokens=*/5, /*e_dim=*/2, /*hidden_dim=*/3,
                             /*latent_dim=*/2, child);
    EncodedText enc;
    enc.indices = {1, 3, 5, 0, 0, 0};  // three real steps, three padding
    enc.true_length = 3;
    std::vector<CheckedParam> params = {
        {"embedding", h.embedding},       {"gru.w_update", h.gru.w_update},
        {"gru.w_reset", h.gru.w_reset},   {"gru.w_cand", h.gru.w_cand},
        {"gru.b_update", h.gru.b_update}, {"gru.b_reset", h.gru.b_reset},
        {"gru.b_cand", h.gru.b_cand},     {"fuse.w", h.w_fuse},
        {"fuse.b", h.b_fuse},
    };
    LossFn fn = [enc](Tape* tape, const std::vector<Tensor>& v) {
        HfluParams p;
        p.embedding = v[0];
        p.gru = {v[1], v[2], v[3], v[4], v[5], v[6]};
        p.w_fuse = v[7];
        p.b_fuse = v[8];
        return sum_squares(tape, latent_features(tape, enc, p));
    };
    return finite_diff_check(fn, params, step);
}

double check_gdu(std::uint64_t seed, double step) {
    Rng rng(seed);
    Rng child = rng.child("gradcheck.gdu");
    GduParams g = init_gdu(/*in_dim=*/3, /*state_dim=*/2, child);
    std::vector<CheckedParam> params = {
        {"w_forget", g.w_forget},     {"w_adjust", g.w_adjust},
        {"w_select_g", g.w_select_g}, {"w_select_r", g.w_select_r},
        {"w_combine", g.w_combine},   {"b_forget", g.b_forget},
        {"b_adjust", g.b_adjust},     {"b_select_g", g.b_select_g},
        {"b_select_r", g.b_select_r}, {"b_combine", g.b_combine},
        {"x", draw({3}, child)},      {"z", draw({2}, child)},
        {"t", draw({2}, child)},
    };
    LossFn fn = [](Tape* tape, const std::vector<Tensor>& v) {
        GduParams p{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]};
        return sum_squares(tape, gdu_forward(tape, p, v[10], v[11], v[12]));
    };
    return finite_diff_check(fn, params, step);
}

double check_head(std::uint64_t seed, double step) {
    Rng rng(seed);
    Rng child = rng.child("gradcheck.head");
    const std::size_t classes = 4, dim = 3;
    std::vector<CheckedParam> params = {
        {"head.w", draw({classes, dim}, child)},
        {"head.b", draw({classes}, child)},
        {"state", draw({dim}, child)},
    };
    const std::size_t truth = static_cast<std::size_t>(seed % classes);
    LossFn fn = [classes, truth](Tape* tape, const std::vector<Tensor>& v) {
        Tensor probs = softmax(tape, affine(tape, v[0], v[2], v[1]));
        return cross_entropy(tape, probs, one_hot(classes, truth));
    };
    return finite_diff_check(fn, params, step);
}

// Two articles, two creators, one shared subject; every node trains.
Hsn toy_network() {
    Hsn hsn;
    hsn.articles["a1"] = {"a1", "solar panels verified audit", CredLabel::True};
    hsn.articles["a2"] = {"a2", "miracle cure panic hoax", CredLabel::False};
    hsn.creators["c1"] = {"c1", "science desk reporting", CredLabel::MostlyTrue};
    hsn.creators["c2"] = {"c2", "viral rumor blog", CredLabel::MostlyFalse};
    hsn.subjects["s1"] = {"s1", "public health policy", CredLabel::HalfTrue};
    hsn.authorship["a1"] = "c1";
    hsn.authorship["a2"] = "c2";
    hsn.subject_links["a1"] = {"s1"};
    hsn.subject_links["a2"] = {"s1"};
    hsn.finalize();
    return hsn;
}

double check_full_loss(std::uint64_t seed, double step) {
    Hsn hsn = toy_network();
    TrainIds train{{"a1", "a2"}, {"c1", "c2"}, {"s1"}};

    ModelConfig cfg;
    cfg.d = 3;
    cfg.e_dim = 2;
    cfg.hidden_dim = 2;
    cfg.latent_dim = 2;
    cfg.state_dim = 2;
    cfg.q = 6;
    cfg.rounds = 1;
    cfg.alpha = 1e-3;
    cfg.mode = TaskMode::Multi;
    cfg.seed = seed;

    Vocab vocab = build_vocab(hsn, train, cfg.d, cfg.tokenizer);
    ModelParams like = init_model(cfg, vocab.tokens.size());
    FeatureBank bank(hsn, vocab, cfg);

    std::vector<CheckedParam> params;
    for_each_param(like, [&](const std::string& name, const Tensor& t, ParamKind) {
        params.push_back({name, t});
    });
    LossFn fn = [&](Tape* tape, const std::vector<Tensor>& v) {
        ModelParams p = with_values(like, v);
        NodeTensors feats = bank.combined(tape, p);
        DiffusionState st = diffuse(tape, hsn, feats, p.gdu_stack(), cfg.rounds);
        return training_loss(tape, p, hsn, train, st, cfg.alpha).total;
    };
    return finite_diff_check(fn, params, step);
}

}  // namespace

GradCheckReport run_gradcheck(double step) {
    struct Composite {
        const char* name;
        double (*run)(std::uint64_t, double);
    };
    const Composite composites[] = {
        {"gru_step", check_gru_step}, {"latent", check_latent},  {"gdu", check_gdu},
        {"head", check_head},         {"full_loss", check_full_loss},
    };
    GradCheckReport report;
    for (const auto& c : composites)
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            double err = c.run(seed, step);
            report.cases.push_back({c.name, seed, err});
            report.max_rel_err = std::max(report.max_rel_err, err);
        }
    return report;
}

}  // namespace newscred
