#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdmt/time.hpp"

namespace rdmt {

enum class Entity {
  kPersonal,
  kProblem,
  kEncounter,
  kDiagnosis,
  kOrder,
  kClinicalNote,
  kForm,
};

const char* entity_name(Entity e);
std::optional<Entity> entity_from_name(const std::string& name);

// One timestamped atom of patient history. Non-form entities carry a flat
// payload of field -> string value (nested input keys are flattened with
// dots at parse time); form entities carry key-value pairs instead.
// timestamp is absent only for personal data.
struct EventRecord {
  std::string patient_id;
  Entity entity = Entity::kPersonal;
  std::optional<Instant> timestamp;
  std::map<std::string, std::string> payload;
  std::vector<std::pair<std::string, std::string>> form_pairs;
  std::optional<std::string> encounter_id;

  bool operator==(const EventRecord&) const = default;
};

struct Admission {
  std::string patient_id;
  std::string admission_id;
  Instant start = 0;
  Instant end = 0;
  bool died = false;
  bool against_medical_advice = false;
  bool transferred = false;
  std::optional<Instant> prereg_created_at;
  Instant created_at = 0;

  bool operator==(const Admission&) const = default;
};

// All of one patient's events (sorted by timestamp, timestampless personal
// events first, stable on input order) and admissions (sorted by start).
struct PatientHistory {
  std::string patient_id;
  std::vector<EventRecord> events;
  std::vector<Admission> admissions;
};

struct MalformedLine {
  std::size_t line_no = 0;  // 1-based
  std::string reason;
};

// First line of a stream is unreadable: the input is presumed not to be in
// the expected format at all.
struct FatalFormat : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseResult {
  std::vector<EventRecord> records;
  std::vector<MalformedLine> errors;
};

struct AdmissionParseResult {
  std::vector<Admission> admissions;
  std::vector<MalformedLine> errors;
};

// Reads line-delimited JSON events. Malformed lines after the first are
// collected; a malformed first line throws FatalFormat.
ParseResult parse_records(std::istream& in);
AdmissionParseResult parse_admissions(std::istream& in);

ParseResult parse_records_file(const std::string& path);
AdmissionParseResult parse_admissions_file(const std::string& path);

// Inverse of parse_records for one record (single line, no trailing newline).
std::string serialize_record(const EventRecord& r);
std::string serialize_admission(const Admission& a);

// Groups events and admissions per patient. Events are sorted by timestamp
// with a stable tie-break on input order; admissions by (start, id).
// Output histories are ordered by patient_id.
std::vector<PatientHistory> group_by_patient(const std::vector<EventRecord>& records,
                                             const std::vector<Admission>& admissions);

}  // namespace rdmt
