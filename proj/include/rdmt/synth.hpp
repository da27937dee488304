#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdmt/cohort.hpp"
#include "rdmt/records.hpp"

namespace rdmt {

enum class SignalKind { kNone, kToken, kTemporal };

SignalKind signal_kind_from_name(const std::string& name);
const char* signal_kind_name(SignalKind k);

// Deterministic synthetic-EHR generator. Admissions are laid out in
// "clusters" separated by more than horizon + 1 day so the label of every
// admission is decided entirely within its own cluster; the manifest records
// the intended label per admission for verification against the cohort rules.
struct SynthConfig {
  int n_patients = 1000;
  int events_per_patient_min = 10;
  int events_per_patient_max = 40;
  int token_pool = 200;
  double target_positive_rate = 0.0618;
  SignalKind signal = SignalKind::kNone;
  // Token signal: probability of planting the marker into each of the three
  // recent-history slots of a positive example.
  double signal_q = 0.9;
  std::uint64_t seed = 0;
  int span_days = 730;
  double second_cluster_prob = 0.25;

  // Cluster-type probabilities for the negative scenarios that exercise one
  // cohort rule each (the remainder is split between plain negatives and
  // positive pairs to hit target_positive_rate).
  double planned_weight = 0.04;          // readmission with a >24h prereg
  double invalid_readmit_weight = 0.04;  // readmission that is not valid
  double gap31_weight = 0.04;            // readmission just past the horizon
  double invalid_alone_weight = 0.04;    // lone invalid admission, no example

  // Entity mix of the noise events.
  double problem_weight = 0.08;
  double encounter_weight = 0.22;
  double diagnosis_weight = 0.15;
  double order_weight = 0.20;
  double note_weight = 0.20;
  double form_weight = 0.15;
};

struct AdmissionIntent {
  std::string admission_id;
  std::string patient_id;
  bool is_example = false;  // valid admissions become examples
  int intended_label = 0;
  std::vector<Instant> signal_positions;
};

struct SynthStats {
  std::size_t examples = 0;
  std::size_t positives = 0;
  std::size_t exact_24h_preregs = 0;
  std::size_t exact_30d_gaps = 0;
};

struct SynthOutput {
  std::vector<EventRecord> events;
  std::vector<Admission> admissions;
  std::vector<AdmissionIntent> manifest;
  SynthStats stats;
};

SynthOutput generate(const SynthConfig& config);

void write_synth_files(const SynthOutput& out, const std::string& events_path,
                       const std::string& admissions_path,
                       const std::string& manifest_path);

std::vector<AdmissionIntent> load_manifest(const std::string& path);

struct LabelDiscrepancy {
  std::string admission_id;
  std::string what;
};

// Diffs cohort output against generator intent; empty means the cohort rules
// and the generator agree.
std::vector<LabelDiscrepancy> verify_labels(const std::vector<AdmissionIntent>& intents,
                                            const std::vector<Example>& examples);

}  // namespace rdmt
