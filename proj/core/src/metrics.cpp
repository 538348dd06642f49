#include "skylens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skylens/errors.hpp"

namespace skylens::harness {

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels size mismatch");
    long pos = 0, neg = 0;
    for (const auto l : labels) (l ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw EstimationError("ROC requires both label classes");

    // Negate so that higher internal score = more positive.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return -scores[a] > -scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, -1e300});
    long tp = 0, fp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Advance over the tie group as one sweep step.
        const double s = -scores[order[i]];
        while (i < order.size() && -scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp) += 1;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        auc += 0.5 * (fpr - prev_fpr) * (tpr + prev_tpr);
        curve.points.push_back({fpr, tpr, -s});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

double nrmse(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size() || predicted.empty())
        throw std::invalid_argument("nrmse requires equal nonzero lengths");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double d = predicted[i] - actual[i];
        err += d * d;
        ref += actual[i] * actual[i];
    }
    if (ref == 0.0) throw std::invalid_argument("nrmse undefined for an all-zero actual signal");
    return std::sqrt(err / static_cast<double>(actual.size())) /
           std::sqrt(ref / static_cast<double>(actual.size()));
}

}  // namespace skylens::harness
