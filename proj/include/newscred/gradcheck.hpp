#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace newscred {

struct GradCheckCase {
    std::string name;
    std::uint64_t seed = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double max_rel_err = 0.0;
};

// Central-difference verification of every composite the model is built
// from: a GRU step, the latent feature unit, a GDU cell, the output head,
// and the complete training loss on a five-node toy network (d=3, widths 2,
// one diffusion round). Each composite runs at seeds 1..3 with randomized
// parameters and inputs.
GradCheckReport run_gradcheck(double step = 1e-5);

}  // namespace newscred
