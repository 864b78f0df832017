#pragma once

#include <cstdint>
#include <vector>

#include "helprank/errors.hpp"
#include "helprank/rng.hpp"

namespace helprank {

// Seeded partition of n observations into k folds whose sizes differ by at
// most one. Same seed, same assignment.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;  // index -> fold in [0, k)

    std::vector<std::size_t> test_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == fold) out.push_back(i);
        return out;
    }
    std::vector<std::size_t> train_indices(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] != fold) out.push_back(i);
        return out;
    }
};

inline FoldPlan make_fold_plan(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2");
    if (n < k) throw DataError("fewer observations than folds");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 0x666f6c64 /* "fold" */));
    rng.shuffle(order);
    FoldPlan plan;
    plan.k = k;
    plan.assignment.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) plan.assignment[order[pos]] = pos % k;
    return plan;
}

}  // namespace helprank
