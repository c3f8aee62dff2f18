#pragma once

#include <map>
#include <string>
#include <vector>

#include "alc/refine.hpp"

namespace alc {

// Population variance across the m passes, averaged over all pixels
// and classes. Bounded by 0.25 for values in [0,1].
double sample_uncertainty(const ProbStack& stack);

struct SelectionResult {
    std::map<std::string, double> scores;
    std::vector<std::string> selected;  // lowest uncertainty first
    std::vector<std::string> residual;  // rest, same ordering rule
    int k_effective = 0;
};

// Ascending sort by (score, id); the first round(k_ratio * n) ids are
// selected. The id tie-break keeps the split deterministic.
SelectionResult select_top_k(const std::map<std::string, double>& scores, double k_ratio);

}  // namespace alc
