// SPDX-License-Identifier: Apache-2.0
#include "nmt/bleu.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "nmt/errors.hpp"

namespace nmt {

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

using NgramCounts = std::map<std::vector<std::string>, int64_t>;

NgramCounts ngrams(const std::vector<std::string>& toks, size_t n) {
    NgramCounts counts;
    if (toks.size() < n) return counts;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
}

} // namespace

BleuBreakdown bleu_breakdown(const std::vector<std::string>& hypotheses,
                             const std::vector<std::string>& references, bool add_one_smoothing) {
    if (hypotheses.size() != references.size())
        throw DataError("BLEU needs one reference line per hypothesis line (" +
                        std::to_string(hypotheses.size()) + " vs " + std::to_string(references.size()) + ")");
    if (hypotheses.empty()) throw DataError("BLEU over zero lines");

    BleuBreakdown b;
    for (size_t i = 0; i < hypotheses.size(); ++i) {
        auto hyp = tokens_of(hypotheses[i]);
        auto ref = tokens_of(references[i]);
        b.hyp_tokens += static_cast<int64_t>(hyp.size());
        b.ref_tokens += static_cast<int64_t>(ref.size());
        for (size_t n = 1; n <= 4; ++n) {
            NgramCounts h = ngrams(hyp, n);
            NgramCounts r = ngrams(ref, n);
            for (const auto& [gram, count] : h) {
                b.total[n - 1] += count;
                auto it = r.find(gram);
                if (it != r.end()) b.matched[n - 1] += std::min(count, it->second);
            }
        }
    }

    double log_sum = 0.0;
    bool zero = false;
    for (size_t n = 0; n < 4; ++n) {
        int64_t m = b.matched[n], t = b.total[n];
        if (add_one_smoothing && n > 0) {
            m += 1;
            t += 1;
        }
        b.precisions[n] = t > 0 ? static_cast<double>(m) / static_cast<double>(t) : 0.0;
        if (b.precisions[n] <= 0.0)
            zero = true;
        else
            log_sum += std::log(b.precisions[n]);
    }

    b.brevity_penalty =
        b.hyp_tokens >= b.ref_tokens || b.hyp_tokens == 0
            ? 1.0
            : std::exp(1.0 - static_cast<double>(b.ref_tokens) / static_cast<double>(b.hyp_tokens));
    b.bleu = zero || b.hyp_tokens == 0 ? 0.0 : 100.0 * b.brevity_penalty * std::exp(log_sum / 4.0);
    return b;
}

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
            bool add_one_smoothing) {
    return bleu_breakdown(hypotheses, references, add_one_smoothing).bleu;
}

} // namespace nmt
