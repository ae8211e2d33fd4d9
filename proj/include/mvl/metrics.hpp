#pragma once

#include <vector>

namespace mvl {

// Mann-Whitney AUROC: fraction of (positive, negative) pairs ordered
// correctly, ties counted half. Throws when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean precision at each positive's rank in descending-score order; ties
// keep their input order (stable sort). Throws with no positives.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace mvl
