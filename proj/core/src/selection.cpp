#include "alc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace alc {

double sample_uncertainty(const ProbStack& stack) {
    const Tensor mean = stack_mean(stack);
    const std::size_t n = mean.numel();
    double acc = 0.0;
    for (int j = 0; j < stack.m; ++j) {
        const double* src = stack.probs.data.data() + static_cast<std::size_t>(j) * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = src[i] - mean.data[i];
            acc += d * d;
        }
    }
    return acc / (static_cast<double>(stack.m) * static_cast<double>(n));
}

SelectionResult select_top_k(const std::map<std::string, double>& scores, double k_ratio) {
    if (scores.empty()) throw std::invalid_argument("select_top_k: empty score map");
    if (k_ratio < 0.0 || k_ratio > 1.0)
        throw std::invalid_argument("select_top_k: k_ratio outside [0,1]");

    std::vector<std::pair<double, std::string>> order;
    order.reserve(scores.size());
    for (const auto& [id, s] : scores) order.emplace_back(s, id);
    std::sort(order.begin(), order.end());

    SelectionResult res;
    res.scores = scores;
    res.k_effective =
        static_cast<int>(std::lround(k_ratio * static_cast<double>(scores.size())));
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < static_cast<std::size_t>(res.k_effective))
            res.selected.push_back(order[i].second);
        else
            res.residual.push_back(order[i].second);
    }
    return res;
}

}  // namespace alc
