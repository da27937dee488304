#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmt/records.hpp"

namespace rdmt {

// A patient history slice anchored at a valid admission, labeled 1 iff an
// unplanned valid readmission begins within the horizon after the index
// admission's discharge.
struct Example {
  std::string patient_id;
  std::string anchor_admission_id;
  Instant anchor_time = 0;
  std::vector<EventRecord> history;  // every timestamp <= anchor_time
  int label = 0;
};

enum class Split { kTrain, kValidation, kTest };

const char* split_name(Split s);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitAssignment {
  std::map<std::string, Split> by_patient;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

// prereg_created_at found after created_at: corrupt input. The admission is
// excluded from labeling and reported.
struct ChronologyIssue {
  std::string admission_id;
  std::string reason;
};

struct NoPositives : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AnchorPoint { kAdmission, kDischarge };

struct CohortConfig {
  int horizon_days = 30;
  std::int64_t prereg_window_hours = 24;
  AnchorPoint anchor = AnchorPoint::kAdmission;
};

// Survived, not discharged against medical advice, not transferred.
bool is_valid_admission(const Admission& a);

// No pre-registration, or one created within the closed 24-hour window
// before the hospitalization record. Throws std::invalid_argument if
// prereg_created_at > created_at; callers exclude such admissions via
// the issue-collecting overload instead.
bool is_unplanned(const Admission& a, std::int64_t prereg_window_hours = 24);

// One Example per valid admission; see Example for the label rule.
// Chronology-corrupt admissions are skipped and reported through issues.
std::vector<Example> build_examples(const PatientHistory& h, const CohortConfig& cfg,
                                    std::vector<ChronologyIssue>* issues = nullptr);

// Deterministic patient-level assignment: seeded hash of patient_id
// thresholded on cumulative ratios. Adding patients never reassigns
// existing ones.
Split assign_split(const std::string& patient_id, std::uint64_t seed,
                   const SplitRatios& ratios);
SplitAssignment split_by_patient(const std::vector<Example>& examples,
                                 std::uint64_t seed, const SplitRatios& ratios);

// Duplicates uniformly-randomly chosen positives until positives/total
// reaches target_rate. Negatives are untouched. Throws NoPositives.
std::vector<Example> oversample_positives(const std::vector<Example>& train,
                                          double target_rate, std::uint64_t seed);

}  // namespace rdmt
