#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "moseg/spectral.hpp"

namespace moseg {

/// Fraction of misclassified points under the best injective mapping from
/// predicted clusters to ground-truth clusters (Hungarian matching on the
/// contingency table; surplus predicted clusters map to nothing and count as
/// errors).
double classification_error(const Assignment& pred, const std::vector<int>& truth);

/// Error of assigning every point to the prevalent ground-truth group:
/// 1 - max_m |A_m| / N.
double prevalence_baseline(const std::vector<int>& truth);

/// Minimum-cost assignment of an n x n cost matrix; returns col_of_row.
/// O(n^3), exact.
std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost);

struct SequenceEval {
    std::string name;
    double error = 0.0;
    std::optional<int> selected_m;  // when model selection ran
    std::optional<int> true_m;
};

struct EvalReport {
    std::vector<SequenceEval> sequences;
    double mean_error = 0.0;
    double median_error = 0.0;
    /// Fraction of sequences with selected_m == true_m; set only when both
    /// are present for at least one sequence.
    std::optional<double> correct_rate;
};

EvalReport make_report(std::vector<SequenceEval> sequences);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace moseg
