#pragma once

#include <stdexcept>
#include <vector>

#include "relconv/common.hpp"

namespace relconv {

struct F1Scores {
    double micro = 0.0;
    double macro = 0.0;
};

/// Micro/macro F1 over single-label multiclass predictions. Micro pools the
/// confusion counts globally (and so equals accuracy here); macro averages
/// per-class F1 over all C classes, counting classes absent from both pred
/// and truth as 0.
inline F1Scores f1_scores(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                          std::size_t classes) {
    if (pred.empty() || pred.size() != truth.size())
        throw std::invalid_argument("f1_scores: need equal, non-empty prediction and truth vectors");
    std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= classes || truth[i] >= classes)
            throw std::out_of_range("f1_scores: label out of range");
        if (pred[i] == truth[i])
            tp[pred[i]]++;
        else {
            fp[pred[i]]++;
            fn[truth[i]]++;
        }
    }
    std::size_t tp_all = 0, fp_all = 0, fn_all = 0;
    double macro = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        tp_all += tp[c];
        fp_all += fp[c];
        fn_all += fn[c];
        const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
        macro += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
    }
    F1Scores out;
    const double micro_denom = static_cast<double>(2 * tp_all + fp_all + fn_all);
    out.micro = micro_denom > 0.0 ? 2.0 * static_cast<double>(tp_all) / micro_denom : 0.0;
    out.macro = macro / static_cast<double>(classes);
    return out;
}

}  // namespace relconv
