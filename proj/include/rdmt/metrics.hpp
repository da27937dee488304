#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rdmt {

struct SingleClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvalReport {
  double auroc = 0.0;
  double precision0 = 0.0, recall0 = 0.0;
  double precision1 = 0.0, recall1 = 0.0;
  bool precision0_defined = true;
  bool precision1_defined = true;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.5;
  std::size_t n_examples = 0;
  double positive_rate = 0.0;
};

// Probability that a random positive outscores a random negative, ties
// counted half. Rank-sum formulation with average ranks for ties,
// O(n log n). Throws SingleClass unless both classes are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Confusion counts and per-class precision/recall at `predict 1 iff
// score >= threshold`. Undefined precisions (no predictions for the class)
// are reported as 0 with the defined flag cleared.
EvalReport precision_recall(const std::vector<double>& scores,
                            const std::vector<int>& labels, double threshold = 0.5);

// Full report: precision_recall plus AUROC.
EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                    double threshold = 0.5);

// Human-readable block, floats at 4 decimals, stable field order.
std::string render_report(const EvalReport& r);

// One-line machine-readable form and its inverse.
std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& line);

}  // namespace rdmt
