// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

namespace nmt {

struct BleuBreakdown {
    double bleu = 0.0;                             // 0..100
    std::array<double, 4> precisions{};            // clipped n-gram precisions
    std::array<int64_t, 4> matched{};              // clipped match counts
    std::array<int64_t, 4> total{};                // hypothesis n-gram counts
    double brevity_penalty = 1.0;
    int64_t hyp_tokens = 0;
    int64_t ref_tokens = 0;
};

// Corpus-level BLEU-4 on whitespace tokens: geometric mean of clipped
// n-gram precisions times the brevity penalty min(1, e^(1 - r/c)). With
// add_one_smoothing, precisions for n >= 2 become (m+1)/(t+1) so tiny dev
// sets without 4-gram matches still produce a usable signal.
BleuBreakdown bleu_breakdown(const std::vector<std::string>& hypotheses,
                             const std::vector<std::string>& references, bool add_one_smoothing = false);

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            bool add_one_smoothing = false);

} // namespace nmt
