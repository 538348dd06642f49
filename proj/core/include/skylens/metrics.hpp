#pragma once

#include <cstdint>
#include <vector>

namespace skylens::harness {

struct RocPoint {
    double fpr;
    double tpr;
    double threshold;  // in the caller's score convention
};

// Convention: label 1 = occluded (positive), and LOWER scores indicate
// occlusion; scores are negated internally so an informative predictor has
// AUC > 0.5.
struct RocCurve {
    std::vector<RocPoint> points;  // fpr/tpr non-decreasing along the sweep
    double auc = 0.0;
};

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// RMSE normalized by the RMS of the true signal.
double nrmse(const std::vector<double>& predicted, const std::vector<double>& actual);

}  // namespace skylens::harness
