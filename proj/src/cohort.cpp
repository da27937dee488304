#include "rdmt/cohort.hpp"

#include <algorithm>

#include "rdmt/hash.hpp"

namespace rdmt {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

bool is_valid_admission(const Admission& a) {
  return !a.died && !a.against_medical_advice && !a.transferred;
}

bool is_unplanned(const Admission& a, std::int64_t prereg_window_hours) {
  if (!a.prereg_created_at) return true;
  std::int64_t gap = a.created_at - *a.prereg_created_at;
  if (gap < 0) {
    throw std::invalid_argument("prereg_created_at after created_at for admission " +
                                a.admission_id);
  }
  return gap <= prereg_window_hours * kSecondsPerHour;
}

namespace {

// Validity + plannedness for each admission, with corrupt ones flagged out.
struct AdmissionFlags {
  bool usable = false;  // chronology is sane
  bool valid = false;
  bool unplanned = false;
};

std::vector<AdmissionFlags> classify(const std::vector<Admission>& admissions,
                                     const CohortConfig& cfg,
                                     std::vector<ChronologyIssue>* issues) {
  std::vector<AdmissionFlags> flags(admissions.size());
  for (std::size_t i = 0; i < admissions.size(); ++i) {
    const Admission& a = admissions[i];
    flags[i].valid = is_valid_admission(a);
    try {
      flags[i].unplanned = is_unplanned(a, cfg.prereg_window_hours);
      flags[i].usable = true;
    } catch (const std::invalid_argument& e) {
      if (issues) issues->push_back({a.admission_id, e.what()});
    }
  }
  return flags;
}

}  // namespace

std::vector<Example> build_examples(const PatientHistory& h, const CohortConfig& cfg,
                                    std::vector<ChronologyIssue>* issues) {
  const auto flags = classify(h.admissions, cfg, issues);
  const std::int64_t horizon = cfg.horizon_days * kSecondsPerDay;

  std::vector<Example> out;
  for (std::size_t i = 0; i < h.admissions.size(); ++i) {
    const Admission& a = h.admissions[i];
    if (!flags[i].usable || !flags[i].valid) continue;

    Example e;
    e.patient_id = h.patient_id;
    e.anchor_admission_id = a.admission_id;
    e.anchor_time = cfg.anchor == AnchorPoint::kAdmission ? a.start : a.end;

    for (const auto& r : h.events) {
      if (!r.timestamp || *r.timestamp <= e.anchor_time) e.history.push_back(r);
    }

    // Label 1 iff some valid unplanned admission starts in (a.end, a.end + horizon].
    for (std::size_t j = 0; j < h.admissions.size(); ++j) {
      if (j == i) continue;
      const Admission& b = h.admissions[j];
      if (!flags[j].usable || !flags[j].valid || !flags[j].unplanned) continue;
      std::int64_t gap = b.start - a.end;
      if (gap > 0 && gap <= horizon) {
        e.label = 1;
        break;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

Split assign_split(const std::string& patient_id, std::uint64_t seed,
                   const SplitRatios& ratios) {
  double u = static_cast<double>(seeded_hash(patient_id, seed) >> 11) * 0x1.0p-53;
  if (u < ratios.train) return Split::kTrain;
  if (u < ratios.train + ratios.validation) return Split::kValidation;
  return Split::kTest;
}

SplitAssignment split_by_patient(const std::vector<Example>& examples,
                                 std::uint64_t seed, const SplitRatios& ratios) {
  SplitAssignment sa;
  sa.seed = seed;
  sa.ratios = ratios;
  for (const auto& e : examples) {
    sa.by_patient.emplace(e.patient_id, assign_split(e.patient_id, seed, ratios));
  }
  return sa;
}

std::vector<Example> oversample_positives(const std::vector<Example>& train,
                                          double target_rate, std::uint64_t seed) {
  std::vector<std::size_t> positive_idx;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label == 1) positive_idx.push_back(i);
  }
  if (positive_idx.empty()) throw NoPositives("training set has no positive examples");

  std::vector<Example> out = train;
  std::size_t positives = positive_idx.size();
  Rng rng(seed);
  while (static_cast<double>(positives) < target_rate * static_cast<double>(out.size())) {
    std::size_t pick = positive_idx[rng.next_below(positive_idx.size())];
    out.push_back(train[pick]);
    ++positives;
  }
  return out;
}

}  // namespace rdmt
