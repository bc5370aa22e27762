#pragma once

#include <map>
#include <string>
#include <vector>

#include "newscred/hsn.hpp"
#include "newscred/tensor.hpp"

namespace newscred {

// Gated diffusive cell parameters. Every matrix is state_dim x
// (in_dim + 2 * state_dim) and acts on the concatenation [x; z; t] of the
// node feature and the two neighbor ports.
struct GduParams {
    Tensor w_forget, w_adjust, w_select_g, w_select_r, w_combine;
    Tensor b_forget, b_adjust, b_select_g, b_select_r, b_combine;
    GduParams tracked(Tape& tape) const;
    std::size_t state_dim() const { return b_forget.numel(); }
};

GduParams init_gdu(std::size_t in_dim, std::size_t state_dim, Rng& rng);

// h = sum over the four (masked z, masked t) combinations of
// gate * tanh(w_combine [x; z'; t'] + b); the gate coefficients are built
// from two sigmoid selection gates and sum to one elementwise.
Tensor gdu_forward(Tape* tape, const GduParams& p, const Tensor& x, const Tensor& z,
                   const Tensor& t);

// Mean of the named states; an empty id list yields a zero vector.
Tensor aggregate_neighbors(Tape* tape, const std::map<std::string, Tensor>& states,
                           const std::vector<std::string>& ids, std::size_t dim);

struct NodeTensors {
    std::map<std::string, Tensor> articles, creators, subjects;
};

struct GduStack {
    GduParams articles, creators, subjects;
    GduStack tracked(Tape& tape) const;
};

struct DiffusionState {
    NodeTensors states;
    int rounds = 0;
};

// Synchronous diffusion: all states start at zero; each round recomputes
// every node from the previous round's states. Articles read the mean of
// their subjects on z and their creator on t; creators and subjects read the
// mean of their articles on z and zero on t. With zero_neighbor_ports both
// ports are held at zero (text-only ablation).
DiffusionState diffuse(Tape* tape, const Hsn& hsn, const NodeTensors& features,
                       const GduStack& params, int rounds, bool zero_neighbor_ports = false);

}  // namespace newscred
