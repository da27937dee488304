#include "rdmt/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace rdmt {

using nlohmann::json;

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("auroc: size mismatch");
  }
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y == 1);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw SingleClass("auroc requires both classes, got " + std::to_string(n_pos) +
                      " positives of " + std::to_string(n));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups; sum the positives' ranks.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

EvalReport precision_recall(const std::vector<double>& scores,
                            const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("precision_recall: empty or mismatched input");
  }
  EvalReport r;
  r.threshold = threshold;
  r.n_examples = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++r.tp;
    else if (predicted && !actual) ++r.fp;
    else if (!predicted && actual) ++r.fn;
    else ++r.tn;
  }
  r.positive_rate = static_cast<double>(r.tp + r.fn) / static_cast<double>(r.n_examples);

  const long predicted1 = r.tp + r.fp;
  const long predicted0 = r.tn + r.fn;
  const long actual1 = r.tp + r.fn;
  const long actual0 = r.tn + r.fp;
  r.precision1_defined = predicted1 > 0;
  r.precision0_defined = predicted0 > 0;
  r.precision1 = predicted1 > 0 ? static_cast<double>(r.tp) / predicted1 : 0.0;
  r.precision0 = predicted0 > 0 ? static_cast<double>(r.tn) / predicted0 : 0.0;
  r.recall1 = actual1 > 0 ? static_cast<double>(r.tp) / actual1 : 0.0;
  r.recall0 = actual0 > 0 ? static_cast<double>(r.tn) / actual0 : 0.0;
  return r;
}

EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                    double threshold) {
  EvalReport r = precision_recall(scores, labels, threshold);
  r.auroc = auroc(scores, labels);
  return r;
}

namespace {

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_report(const EvalReport& r) {
  std::string out;
  out += "auroc: " + fmt4(r.auroc) + "\n";
  out += "precision_0: " + fmt4(r.precision0) + (r.precision0_defined ? "" : " (undefined)") + "\n";
  out += "recall_0: " + fmt4(r.recall0) + "\n";
  out += "precision_1: " + fmt4(r.precision1) + (r.precision1_defined ? "" : " (undefined)") + "\n";
  out += "recall_1: " + fmt4(r.recall1) + "\n";
  out += "confusion: tp=" + std::to_string(r.tp) + " fp=" + std::to_string(r.fp) +
         " tn=" + std::to_string(r.tn) + " fn=" + std::to_string(r.fn) + "\n";
  out += "threshold: " + fmt4(r.threshold) + "\n";
  out += "n_examples: " + std::to_string(r.n_examples) + "\n";
  out += "positive_rate: " + fmt4(r.positive_rate) + "\n";
  return out;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["auroc"] = r.auroc;
  j["precision0"] = r.precision0;
  j["recall0"] = r.recall0;
  j["precision1"] = r.precision1;
  j["recall1"] = r.recall1;
  j["precision0_defined"] = r.precision0_defined;
  j["precision1_defined"] = r.precision1_defined;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["tn"] = r.tn;
  j["fn"] = r.fn;
  j["threshold"] = r.threshold;
  j["n_examples"] = r.n_examples;
  j["positive_rate"] = r.positive_rate;
  return j.dump();
}

EvalReport report_from_json(const std::string& line) {
  json j = json::parse(line);
  EvalReport r;
  r.auroc = j.at("auroc").get<double>();
  r.precision0 = j.at("precision0").get<double>();
  r.recall0 = j.at("recall0").get<double>();
  r.precision1 = j.at("precision1").get<double>();
  r.recall1 = j.at("recall1").get<double>();
  r.precision0_defined = j.at("precision0_defined").get<bool>();
  r.precision1_defined = j.at("precision1_defined").get<bool>();
  r.tp = j.at("tp").get<long>();
  r.fp = j.at("fp").get<long>();
  r.tn = j.at("tn").get<long>();
  r.fn = j.at("fn").get<long>();
  r.threshold = j.at("threshold").get<double>();
  r.n_examples = j.at("n_examples").get<std::size_t>();
  r.positive_rate = j.at("positive_rate").get<double>();
  return r;
}

}  // namespace rdmt
