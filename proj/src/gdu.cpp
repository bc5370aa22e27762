#include "newscred/gdu.hpp"

#include <cmath>

#include "newscred/errors.hpp"

namespace newscred {

GduParams GduParams::tracked(Tape& tape) const {
    return {tape.track(w_forget),   tape.track(w_adjust),   tape.track(w_select_g),
            tape.track(w_select_r), tape.track(w_combine),  tape.track(b_forget),
            tape.track(b_adjust),   tape.track(b_select_g), tape.track(b_select_r),
            tape.track(b_combine)};
}

GduStack GduStack::tracked(Tape& tape) const {
    return {articles.tracked(tape), creators.tracked(tape), subjects.tracked(tape)};
}

GduParams init_gdu(std::size_t in_dim, std::size_t state_dim, Rng& rng) {
    const Shape m{state_dim, in_dim + 2 * state_dim};
    const double s = std::sqrt(6.0 / static_cast<double>(m[0] + m[1]));
    GduParams p;
    p.w_forget = Tensor::uniform(m, -s, s, rng);
    p.w_adjust = Tensor::uniform(m, -s, s, rng);
    p.w_select_g = Tensor::uniform(m, -s, s, rng);
    p.w_select_r = Tensor::uniform(m, -s, s, rng);
    p.w_combine = Tensor::uniform(m, -s, s, rng);
    p.b_forget = Tensor::zeros({state_dim});
    p.b_adjust = Tensor::zeros({state_dim});
    p.b_select_g = Tensor::zeros({state_dim});
    p.b_select_r = Tensor::zeros({state_dim});
    p.b_combine = Tensor::zeros({state_dim});
    return p;
}

namespace {

void check_gate(const Tensor& w, const Tensor& b, std::size_t state, std::size_t width,
                const char* name) {
    if (w.shape().size() != 2 || w.rows() != state || w.cols() != width)
        throw DimensionError(std::string(name) + ": expected [" + std::to_string(state) + ", " +
                             std::to_string(width) + "], got " + shape_str(w.shape()));
    if (b.numel() != state)
        throw DimensionError(std::string(name) + " bias: expected " + std::to_string(state) +
                             " entries, got shape " + shape_str(b.shape()));
}

}  // namespace

Tensor gdu_forward(Tape* tape, const GduParams& p, const Tensor& x, const Tensor& z,
                   const Tensor& t) {
    const std::size_t state = p.state_dim();
    if (z.numel() != state || t.numel() != state)
        throw DimensionError("gdu_forward: ports must have " + std::to_string(state) +
                             " entries, got z " + shape_str(z.shape()) + ", t " +
                             shape_str(t.shape()));
    const std::size_t width = x.numel() + 2 * state;
    check_gate(p.w_forget, p.b_forget, state, width, "w_forget");
    check_gate(p.w_adjust, p.b_adjust, state, width, "w_adjust");
    check_gate(p.w_select_g, p.b_select_g, state, width, "w_select_g");
    check_gate(p.w_select_r, p.b_select_r, state, width, "w_select_r");
    check_gate(p.w_combine, p.b_combine, state, width, "w_combine");

    auto xzt = concat(tape, {x, z, t});
    auto forget = sigmoid(tape, affine(tape, p.w_forget, xzt, p.b_forget));
    auto adjust = sigmoid(tape, affine(tape, p.w_adjust, xzt, p.b_adjust));
    auto g = sigmoid(tape, affine(tape, p.w_select_g, xzt, p.b_select_g));
    auto r = sigmoid(tape, affine(tape, p.w_select_r, xzt, p.b_select_r));

    auto z_masked = hadamard(tape, forget, z);
    auto t_masked = hadamard(tape, adjust, t);

    auto mix = [&](const Tensor& zz, const Tensor& tt) {
        return tanh_op(tape, affine(tape, p.w_combine, concat(tape, {x, zz, tt}), p.b_combine));
    };
    auto ng = one_minus(tape, g);
    auto nr = one_minus(tape, r);
    auto h = add(tape,
                 add(tape, hadamard(tape, hadamard(tape, g, r), mix(z_masked, t_masked)),
                     hadamard(tape, hadamard(tape, ng, r), mix(z, t_masked))),
                 add(tape, hadamard(tape, hadamard(tape, g, nr), mix(z_masked, t)),
                     hadamard(tape, hadamard(tape, ng, nr), mix(z, t))));
    return h;
}

Tensor aggregate_neighbors(Tape* tape, const std::map<std::string, Tensor>& states,
                           const std::vector<std::string>& ids, std::size_t dim) {
    if (ids.empty()) return Tensor::zeros({dim});
    std::vector<Tensor> parts;
    parts.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = states.find(id);
        if (it == states.end())
            throw UsageError("aggregate_neighbors: no state for node \"" + id + "\"");
        parts.push_back(it->second);
    }
    return mean_of(tape, parts);
}

DiffusionState diffuse(Tape* tape, const Hsn& hsn, const NodeTensors& features,
                       const GduStack& params, int rounds, bool zero_neighbor_ports) {
    if (rounds < 1) throw UsageError("diffuse: rounds must be at least 1");
    const std::size_t state = params.articles.state_dim();
    if (params.creators.state_dim() != state || params.subjects.state_dim() != state)
        throw DimensionError("diffuse: state dimension differs between node categories");

    const Tensor zero = Tensor::zeros({state});
    DiffusionState cur;
    for (const auto& [id, _] : hsn.articles) cur.states.articles.emplace(id, zero);
    for (const auto& [id, _] : hsn.creators) cur.states.creators.emplace(id, zero);
    for (const auto& [id, _] : hsn.subjects) cur.states.subjects.emplace(id, zero);

    auto feature_of = [](const std::map<std::string, Tensor>& m, const std::string& id) {
        auto it = m.find(id);
        if (it == m.end()) throw UsageError("diffuse: no feature for node \"" + id + "\"");
        return it->second;
    };

    for (int round = 0; round < rounds; ++round) {
        NodeTensors next;
        for (const auto& [id, _] : hsn.articles) {
            Tensor z = zero, t = zero;
            if (!zero_neighbor_ports) {
                auto links = hsn.subject_links.find(id);
                std::vector<std::string> subs;
                if (links != hsn.subject_links.end())
                    subs.assign(links->second.begin(), links->second.end());
                z = aggregate_neighbors(tape, cur.states.subjects, subs, state);
                t = cur.states.creators.at(hsn.authorship.at(id));
            }
            next.articles.emplace(
                id, gdu_forward(tape, params.articles, feature_of(features.articles, id), z, t));
        }
        for (const auto& [id, arts] : hsn.creator_articles) {
            Tensor z = zero_neighbor_ports
                           ? zero
                           : aggregate_neighbors(tape, cur.states.articles, arts, state);
            next.creators.emplace(
                id, gdu_forward(tape, params.creators, feature_of(features.creators, id), z, zero));
        }
        for (const auto& [id, arts] : hsn.subject_articles) {
            Tensor z = zero_neighbor_ports
                           ? zero
                           : aggregate_neighbors(tape, cur.states.articles, arts, state);
            next.subjects.emplace(
                id, gdu_forward(tape, params.subjects, feature_of(features.subjects, id), z, zero));
        }
        cur.states = std::move(next);
        cur.rounds = round + 1;
    }
    return cur;
}

}  // namespace newscred
