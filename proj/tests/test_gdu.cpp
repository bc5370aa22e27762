#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "newscred/errors.hpp"
#include "newscred/gdu.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace newscred;

namespace {

oracle::Mat to_mat(const Tensor& t) { return {t.rows(), t.cols(), t.values()}; }

oracle::GduWeights to_oracle(const GduParams& p) {
    return {to_mat(p.w_forget),     to_mat(p.w_adjust),     to_mat(p.w_select_g),
            to_mat(p.w_select_r),   to_mat(p.w_combine),    p.b_forget.values(),
            p.b_adjust.values(),    p.b_select_g.values(),  p.b_select_r.values(),
            p.b_combine.values()};
}

GduParams zero_gdu(std::size_t in_dim, std::size_t state) {
    const Shape m{state, in_dim + 2 * state};
    GduParams p;
    p.w_forget = Tensor::zeros(m);
    p.w_adjust = Tensor::zeros(m);
    p.w_select_g = Tensor::zeros(m);
    p.w_select_r = Tensor::zeros(m);
    p.w_combine = Tensor::zeros(m);
    p.b_forget = Tensor::zeros({state});
    p.b_adjust = Tensor::zeros({state});
    p.b_select_g = Tensor::zeros({state});
    p.b_select_r = Tensor::zeros({state});
    p.b_combine = Tensor::zeros({state});
    return p;
}

// Three articles, two creators, two subjects; c1/s1 take a1 and a3, c2/s2
// take a2.
Hsn three_article_hsn() {
    Hsn hsn;
    hsn.articles["a1"] = {"a1", "t1", CredLabel::True};
    hsn.articles["a2"] = {"a2", "t2", CredLabel::False};
    hsn.articles["a3"] = {"a3", "t3", CredLabel::HalfTrue};
    hsn.creators["c1"] = {"c1", "p1", std::nullopt};
    hsn.creators["c2"] = {"c2", "p2", std::nullopt};
    hsn.subjects["s1"] = {"s1", "d1", std::nullopt};
    hsn.subjects["s2"] = {"s2", "d2", std::nullopt};
    hsn.authorship = {{"a1", "c1"}, {"a2", "c2"}, {"a3", "c1"}};
    hsn.subject_links = {{"a1", {"s1"}}, {"a2", {"s2"}}, {"a3", {"s1"}}};
    hsn.finalize();
    return hsn;
}

NodeTensors random_features(const Hsn& hsn, std::size_t in_dim, Rng& rng) {
    NodeTensors f;
    for (const auto& [id, _] : hsn.articles)
        f.articles.emplace(id, Tensor::uniform({in_dim}, -1.0, 1.0, rng));
    for (const auto& [id, _] : hsn.creators)
        f.creators.emplace(id, Tensor::uniform({in_dim}, -1.0, 1.0, rng));
    for (const auto& [id, _] : hsn.subjects)
        f.subjects.emplace(id, Tensor::uniform({in_dim}, -1.0, 1.0, rng));
    return f;
}

oracle::Vec oracle_mean(const std::vector<oracle::Vec>& parts) {
    oracle::Vec out(parts.front().size(), 0.0);
    for (const auto& p : parts)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
    for (auto& v : out) v /= static_cast<double>(parts.size());
    return out;
}

}  // namespace

TEST_CASE("gdu_forward with all-zero parameters returns zero") {
    GduParams p = zero_gdu(3, 2);
    Tensor h = gdu_forward(nullptr, p, Tensor::vec({0.3, -0.7, 1.1}), Tensor::vec({0.5, -0.5}),
                           Tensor::vec({1.0, 2.0}));
    CHECK(h.values() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("gdu_forward with zero ports collapses to a plain tanh unit") {
    Rng rng(9);
    GduParams p = init_gdu(3, 2, rng);
    Tensor x = Tensor::vec({0.4, -1.2, 0.8});
    Tensor zero = Tensor::zeros({2});
    Tensor h = gdu_forward(nullptr, p, x, zero, zero);
    Tensor expect =
        tanh_op(nullptr, affine(nullptr, p.w_combine, concat(nullptr, {x, zero, zero}),
                                p.b_combine));
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(h.at(i) == doctest::Approx(expect.at(i)).epsilon(1e-12));
}

TEST_CASE("gdu_forward matches the scalar oracle") {
    for (std::uint64_t seed : {42ull, 43ull, 44ull}) {
        Rng rng(seed);
        GduParams p = init_gdu(3, 2, rng);
        Tensor x = Tensor::uniform({3}, -1.5, 1.5, rng);
        Tensor z = Tensor::uniform({2}, -1.0, 1.0, rng);
        Tensor t = Tensor::uniform({2}, -1.0, 1.0, rng);
        Tensor h = gdu_forward(nullptr, p, x, z, t);
        oracle::Vec expect = oracle::gdu_forward(to_oracle(p), x.values(), z.values(),
                                                 t.values());
        REQUIRE(h.numel() == 2);
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(h.at(i) == doctest::Approx(expect[i]).epsilon(1e-10));
    }
}

TEST_CASE("gdu_forward names the offending matrix on dimension mismatch") {
    Rng rng(1);
    GduParams p = init_gdu(3, 2, rng);
    SUBCASE("bad gate matrix") {
        p.w_adjust = Tensor::zeros({2, 5});
        auto msg = message_of<DimensionError>([&] {
            gdu_forward(nullptr, p, Tensor::zeros({3}), Tensor::zeros({2}), Tensor::zeros({2}));
        });
        CHECK(contains(msg, "w_adjust"));
    }
    SUBCASE("bad port width") {
        auto msg = message_of<DimensionError>([&] {
            gdu_forward(nullptr, p, Tensor::zeros({3}), Tensor::zeros({3}), Tensor::zeros({2}));
        });
        CHECK(contains(msg, "ports"));
    }
}

TEST_CASE("gdu output is a convex combination of tanh values") {
    Rng rng(77);
    int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        GduParams p = init_gdu(3, 2, rng);
        oracle::GduWeights w = to_oracle(p);
        oracle::Vec x = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
        oracle::Vec z = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
        oracle::Vec t = {rng.uniform(-3, 3), rng.uniform(-3, 3)};

        Tensor h = gdu_forward(nullptr, p, Tensor::vec({x[0], x[1], x[2]}),
                               Tensor::vec({z[0], z[1]}), Tensor::vec({t[0], t[1]}));
        for (double v : h.values()) {
            CHECK(v > -1.0);
            CHECK(v < 1.0);
        }

        // gate ranges and the coefficient-sum identity, via the oracle
        oracle::Vec xzt = oracle::cat3(x, z, t);
        oracle::Vec g = oracle::affine(w.w_select_g, xzt, w.b_select_g);
        oracle::Vec r = oracle::affine(w.w_select_r, xzt, w.b_select_r);
        oracle::Vec f = oracle::affine(w.w_forget, xzt, w.b_forget);
        oracle::Vec e = oracle::affine(w.w_adjust, xzt, w.b_adjust);
        for (std::size_t i = 0; i < 2; ++i) {
            double gs = oracle::sig(g[i]), rs = oracle::sig(r[i]);
            double fs = oracle::sig(f[i]), es = oracle::sig(e[i]);
            CHECK(gs > 0.0);
            CHECK(gs < 1.0);
            CHECK(fs > 0.0);
            CHECK(fs < 1.0);
            CHECK(es > 0.0);
            CHECK(es < 1.0);
            double coeff_sum =
                gs * rs + (1 - gs) * rs + gs * (1 - rs) + (1 - gs) * (1 - rs);
            CHECK(std::fabs(coeff_sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("aggregate_neighbors averages, defaulting empties to zero") {
    std::map<std::string, Tensor> states;
    states.emplace("a", Tensor::vec({1.0, 2.0}));
    states.emplace("b", Tensor::vec({0.0, 1.0}));
    states.emplace("c", Tensor::vec({-1.0, 0.0}));
    CHECK(aggregate_neighbors(nullptr, states, {}, 2).values() == std::vector<double>{0, 0});
    CHECK(aggregate_neighbors(nullptr, states, {"a"}, 2).values() ==
          std::vector<double>{1.0, 2.0});
    Tensor m = aggregate_neighbors(nullptr, states, {"a", "b"}, 2);
    CHECK(m.values() == std::vector<double>{0.5, 1.5});
    CHECK_THROWS_AS(aggregate_neighbors(nullptr, states, {"zzz"}, 2), UsageError);
}

TEST_CASE("diffuse round one sees zero ports everywhere") {
    Hsn hsn = three_article_hsn();
    Rng rng(5);
    NodeTensors feats = random_features(hsn, 3, rng);
    Rng prng(6);
    GduStack stack{init_gdu(3, 2, prng), init_gdu(3, 2, prng), init_gdu(3, 2, prng)};

    DiffusionState st = diffuse(nullptr, hsn, feats, stack, 1);
    CHECK(st.rounds == 1);
    Tensor zero = Tensor::zeros({2});
    for (const auto& [id, x] : feats.articles) {
        Tensor direct = gdu_forward(nullptr, stack.articles, x, zero, zero);
        CHECK(st.states.articles.at(id).values() == direct.values());
    }
    for (const auto& [id, x] : feats.creators) {
        Tensor direct = gdu_forward(nullptr, stack.creators, x, zero, zero);
        CHECK(st.states.creators.at(id).values() == direct.values());
    }
}

TEST_CASE("diffuse matches a hand-unrolled two-round oracle computation") {
    Hsn hsn = three_article_hsn();
    Rng rng(42);
    NodeTensors feats = random_features(hsn, 3, rng);
    Rng prng(43);
    GduStack stack{init_gdu(3, 2, prng), init_gdu(3, 2, prng), init_gdu(3, 2, prng)};
    DiffusionState st = diffuse(nullptr, hsn, feats, stack, 2);
    CHECK(st.rounds == 2);

    oracle::GduWeights wa = to_oracle(stack.articles);
    oracle::GduWeights wc = to_oracle(stack.creators);
    oracle::GduWeights ws = to_oracle(stack.subjects);
    auto xa = [&](const char* id) { return feats.articles.at(id).values(); };
    auto xc = [&](const char* id) { return feats.creators.at(id).values(); };
    auto xs = [&](const char* id) { return feats.subjects.at(id).values(); };
    const oracle::Vec zero = {0.0, 0.0};

    // round 1: every port reads the zero initialization
    std::map<std::string, oracle::Vec> a1, c1, s1;
    for (const char* id : {"a1", "a2", "a3"})
        a1[id] = oracle::gdu_forward(wa, xa(id), zero, zero);
    for (const char* id : {"c1", "c2"})
        c1[id] = oracle::gdu_forward(wc, xc(id), zero, zero);
    for (const char* id : {"s1", "s2"})
        s1[id] = oracle::gdu_forward(ws, xs(id), zero, zero);

    // round 2: articles read subject means and their creator; creators and
    // subjects read their article means
    std::map<std::string, oracle::Vec> a2, c2, s2;
    a2["a1"] = oracle::gdu_forward(wa, xa("a1"), s1["s1"], c1["c1"]);
    a2["a2"] = oracle::gdu_forward(wa, xa("a2"), s1["s2"], c1["c2"]);
    a2["a3"] = oracle::gdu_forward(wa, xa("a3"), s1["s1"], c1["c1"]);
    c2["c1"] = oracle::gdu_forward(wc, xc("c1"), oracle_mean({a1["a1"], a1["a3"]}), zero);
    c2["c2"] = oracle::gdu_forward(wc, xc("c2"), a1["a2"], zero);
    s2["s1"] = oracle::gdu_forward(ws, xs("s1"), oracle_mean({a1["a1"], a1["a3"]}), zero);
    s2["s2"] = oracle::gdu_forward(ws, xs("s2"), a1["a2"], zero);

    for (const auto& [id, expect] : a2)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(st.states.articles.at(id).at(i) == doctest::Approx(expect[i]).epsilon(1e-9));
    for (const auto& [id, expect] : c2)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(st.states.creators.at(id).at(i) == doctest::Approx(expect[i]).epsilon(1e-9));
    for (const auto& [id, expect] : s2)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(st.states.subjects.at(id).at(i) == doctest::Approx(expect[i]).epsilon(1e-9));

    SUBCASE("states remain strictly inside (-1,1)") {
        for (const auto& [id, h] : st.states.articles)
            for (double v : h.values()) {
                CHECK(v > -1.0);
                CHECK(v < 1.0);
            }
    }
}

TEST_CASE("diffuse is invariant under graph isomorphism") {
    Hsn hsn = three_article_hsn();
    Rng rng(31);
    NodeTensors feats = random_features(hsn, 3, rng);
    Rng prng(32);
    GduStack stack{init_gdu(3, 2, prng), init_gdu(3, 2, prng), init_gdu(3, 2, prng)};
    DiffusionState st = diffuse(nullptr, hsn, feats, stack, 2);

    // relabel so the sort order of every category changes
    std::map<std::string, std::string> rename = {{"a1", "n9"}, {"a2", "n1"}, {"a3", "n5"},
                                                 {"c1", "q2"}, {"c2", "q1"}, {"s1", "u2"},
                                                 {"s2", "u1"}};
    Hsn iso;
    for (const auto& [id, a] : hsn.articles)
        iso.articles[rename.at(id)] = {rename.at(id), a.text, a.label};
    for (const auto& [id, c] : hsn.creators)
        iso.creators[rename.at(id)] = {rename.at(id), c.profile, c.label};
    for (const auto& [id, s] : hsn.subjects)
        iso.subjects[rename.at(id)] = {rename.at(id), s.description, s.label};
    for (const auto& [aid, cid] : hsn.authorship) iso.authorship[rename.at(aid)] = rename.at(cid);
    for (const auto& [aid, subs] : hsn.subject_links)
        for (const auto& sid : subs) iso.subject_links[rename.at(aid)].insert(rename.at(sid));
    iso.finalize();
    NodeTensors iso_feats;
    for (const auto& [id, t] : feats.articles) iso_feats.articles.emplace(rename.at(id), t);
    for (const auto& [id, t] : feats.creators) iso_feats.creators.emplace(rename.at(id), t);
    for (const auto& [id, t] : feats.subjects) iso_feats.subjects.emplace(rename.at(id), t);

    DiffusionState iso_st = diffuse(nullptr, iso, iso_feats, stack, 2);
    for (const auto& [id, h] : st.states.articles) {
        const Tensor& other = iso_st.states.articles.at(rename.at(id));
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(h.at(i) == doctest::Approx(other.at(i)).epsilon(1e-12));
    }
    for (const auto& [id, h] : st.states.creators) {
        const Tensor& other = iso_st.states.creators.at(rename.at(id));
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(h.at(i) == doctest::Approx(other.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("diffuse with zeroed neighbor ports ignores the graph") {
    Hsn hsn = three_article_hsn();
    Rng rng(51);
    NodeTensors feats = random_features(hsn, 3, rng);
    Rng prng(52);
    GduStack stack{init_gdu(3, 2, prng), init_gdu(3, 2, prng), init_gdu(3, 2, prng)};

    DiffusionState ablated = diffuse(nullptr, hsn, feats, stack, 2, true);
    // with both ports pinned to zero each round recomputes the same value
    DiffusionState one = diffuse(nullptr, hsn, feats, stack, 1);
    for (const auto& [id, h] : ablated.states.articles)
        CHECK(h.values() == one.states.articles.at(id).values());

    // perturbing another node's feature must not leak in
    NodeTensors poked = feats;
    poked.creators.at("c1") = Tensor::vec({9.0, -9.0, 9.0});
    DiffusionState poked_st = diffuse(nullptr, hsn, poked, stack, 2, true);
    for (const auto& [id, h] : ablated.states.articles)
        CHECK(h.values() == poked_st.states.articles.at(id).values());
}

TEST_CASE("diffuse validates its inputs") {
    Hsn hsn = three_article_hsn();
    Rng rng(61);
    NodeTensors feats = random_features(hsn, 3, rng);
    Rng prng(62);
    GduStack stack{init_gdu(3, 2, prng), init_gdu(3, 2, prng), init_gdu(3, 2, prng)};
    CHECK_THROWS_AS(diffuse(nullptr, hsn, feats, stack, 0), UsageError);

    SUBCASE("missing feature names the node") {
        NodeTensors missing = feats;
        missing.subjects.erase("s2");
        auto msg = message_of<UsageError>([&] { diffuse(nullptr, hsn, missing, stack, 1); });
        CHECK(contains(msg, "s2"));
    }
    SUBCASE("category state widths must agree") {
        GduStack bad{init_gdu(3, 2, prng), init_gdu(3, 3, prng), init_gdu(3, 2, prng)};
        CHECK_THROWS_AS(diffuse(nullptr, hsn, feats, bad, 1), DimensionError);
    }
}

TEST_CASE("gradients flow through two diffusion rounds") {
    Hsn hsn = three_article_hsn();
    Rng rng(71);
    NodeTensors feats = random_features(hsn, 2, rng);
    Rng prng(72);
    GduStack stack{init_gdu(2, 2, prng), init_gdu(2, 2, prng), init_gdu(2, 2, prng)};

    std::vector<CheckedParam> params;
    auto push = [&](const char* cat, const GduParams& p) {
        const char* names[] = {"w_forget", "w_adjust", "w_select_g", "w_select_r", "w_combine",
                               "b_forget", "b_adjust", "b_select_g", "b_select_r", "b_combine"};
        const Tensor* tensors[] = {&p.w_forget, &p.w_adjust, &p.w_select_g, &p.w_select_r,
                                   &p.w_combine, &p.b_forget, &p.b_adjust, &p.b_select_g,
                                   &p.b_select_r, &p.b_combine};
        for (int i = 0; i < 10; ++i)
            params.push_back({std::string(cat) + "." + names[i], *tensors[i]});
    };
    push("articles", stack.articles);
    push("creators", stack.creators);
    push("subjects", stack.subjects);

    LossFn fn = [&](Tape* tape, const std::vector<Tensor>& v) {
        auto unpack = [&](std::size_t base) {
            return GduParams{v[base], v[base + 1], v[base + 2], v[base + 3], v[base + 4],
                             v[base + 5], v[base + 6], v[base + 7], v[base + 8], v[base + 9]};
        };
        GduStack s{unpack(0), unpack(10), unpack(20)};
        DiffusionState st = diffuse(tape, hsn, feats, s, 2);
        std::vector<Tensor> parts;
        for (const auto& [id, h] : st.states.articles) parts.push_back(sum_squares(tape, h));
        for (const auto& [id, h] : st.states.creators) parts.push_back(sum_squares(tape, h));
        for (const auto& [id, h] : st.states.subjects) parts.push_back(sum_squares(tape, h));
        return sum_of(tape, parts);
    };
    CHECK(finite_diff_check(fn, params, 1e-5) < 1e-4);
}
