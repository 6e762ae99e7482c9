#include "moseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "moseg/errors.hpp"

namespace moseg {

std::vector<int> hungarian_min_cost(const Eigen::MatrixXd& cost) {
    // Potential-based assignment (Jonker-Volgenant style), 1-indexed internals.
    const int n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw InputError("hungarian_min_cost: matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) col_of_row[p[j] - 1] = j - 1;
    return col_of_row;
}

double classification_error(const Assignment& pred, const std::vector<int>& truth) {
    const int n = static_cast<int>(truth.size());
    if (static_cast<int>(pred.labels.size()) != n)
        throw InputError("classification_error: prediction and truth disagree on N");
    if (n == 0) throw InputError("classification_error: empty input");

    std::map<int, int> truth_ids;
    for (int t : truth)
        if (!truth_ids.count(t)) {
            const int next = static_cast<int>(truth_ids.size());
            truth_ids[t] = next;
        }
    const int num_pred = pred.num_clusters;
    const int num_truth = static_cast<int>(truth_ids.size());
    const int dim = std::max(num_pred, num_truth);

    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i)
        overlap(pred.labels[i] - 1, truth_ids[truth[i]]) += 1.0;

    const std::vector<int> match = hungarian_min_cost(-overlap);
    double agreement = 0.0;
    for (int r = 0; r < dim; ++r)
        if (match[r] >= 0) agreement += overlap(r, match[r]);
    return 1.0 - agreement / n;
}

double prevalence_baseline(const std::vector<int>& truth) {
    if (truth.empty()) throw InputError("prevalence_baseline: empty input");
    std::map<int, int> counts;
    int largest = 0;
    for (int t : truth) largest = std::max(largest, ++counts[t]);
    return 1.0 - static_cast<double>(largest) / truth.size();
}

EvalReport make_report(std::vector<SequenceEval> sequences) {
    if (sequences.empty()) throw InputError("make_report: no sequences");
    EvalReport report;
    report.sequences = std::move(sequences);
    std::vector<double> errors;
    int selectable = 0, correct = 0;
    for (const auto& s : report.sequences) {
        errors.push_back(s.error);
        if (s.selected_m && s.true_m) {
            ++selectable;
            if (*s.selected_m == *s.true_m) ++correct;
        }
    }
    report.mean_error =
        std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
    std::sort(errors.begin(), errors.end());
    const size_t mid = errors.size() / 2;
    report.median_error = errors.size() % 2 == 1
                              ? errors[mid]
                              : (errors[mid - 1] + errors[mid]) / 2.0;
    if (selectable > 0)
        report.correct_rate = static_cast<double>(correct) / static_cast<double>(selectable);
    return report;
}

std::string report_json(const EvalReport& report) {
    nlohmann::json j;
    auto& seqs = j["sequences"] = nlohmann::json::array();
    for (const auto& s : report.sequences) {
        nlohmann::json js;
        js["name"] = s.name;
        js["error"] = s.error;
        if (s.selected_m) js["selected_m"] = *s.selected_m;
        if (s.true_m) js["true_m"] = *s.true_m;
        seqs.push_back(std::move(js));
    }
    j["mean_error"] = report.mean_error;
    j["median_error"] = report.median_error;
    if (report.correct_rate) j["correct_rate"] = *report.correct_rate;
    return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    size_t name_width = 8;
    for (const auto& s : report.sequences) name_width = std::max(name_width, s.name.size());
    out << std::left;
    out.width(static_cast<std::streamsize>(name_width + 2));
    out << "sequence";
    out << "error      selected_m  true_m\n";
    char buf[64];
    for (const auto& s : report.sequences) {
        out.width(static_cast<std::streamsize>(name_width + 2));
        out << s.name;
        std::snprintf(buf, sizeof(buf), "%-9.4f  ", s.error);
        out << buf;
        if (s.selected_m)
            out << s.selected_m.value() << "           ";
        else
            out << "-           ";
        if (s.true_m)
            out << s.true_m.value();
        else
            out << "-";
        out << '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.4f", report.mean_error);
    out << "mean error:   " << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.4f", report.median_error);
    out << "median error: " << buf << '\n';
    if (report.correct_rate) {
        std::snprintf(buf, sizeof(buf), "%.4f", *report.correct_rate);
        out << "correct rate: " << buf << '\n';
    }
    return out.str();
}

}  // namespace moseg
