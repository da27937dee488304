#include "rdmt/records.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

namespace rdmt {

using nlohmann::json;

const char* entity_name(Entity e) {
  switch (e) {
    case Entity::kPersonal: return "personal";
    case Entity::kProblem: return "problem";
    case Entity::kEncounter: return "encounter";
    case Entity::kDiagnosis: return "diagnosis";
    case Entity::kOrder: return "order";
    case Entity::kClinicalNote: return "clinical_note";
    case Entity::kForm: return "form";
  }
  return "?";
}

std::optional<Entity> entity_from_name(const std::string& name) {
  if (name == "personal") return Entity::kPersonal;
  if (name == "problem") return Entity::kProblem;
  if (name == "encounter") return Entity::kEncounter;
  if (name == "diagnosis") return Entity::kDiagnosis;
  if (name == "order") return Entity::kOrder;
  if (name == "clinical_note") return Entity::kClinicalNote;
  if (name == "form") return Entity::kForm;
  return std::nullopt;
}

namespace {

std::string scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Nested payload objects are flattened into dotted field names; unknown
// fields are preserved verbatim (schema openness is the point of the data).
void flatten_payload(const json& obj, const std::string& prefix,
                     std::map<std::string, std::string>& out) {
  for (const auto& [key, value] : obj.items()) {
    std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten_payload(value, path, out);
    } else if (!value.is_null()) {
      out[path] = scalar_to_string(value);
    }
  }
}

EventRecord record_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("not an object");
  if (!j.contains("patient_id")) throw std::runtime_error("missing patient_id");
  if (!j.contains("entity")) throw std::runtime_error("missing entity");

  EventRecord r;
  r.patient_id = scalar_to_string(j.at("patient_id"));
  auto ent = entity_from_name(j.at("entity").get<std::string>());
  if (!ent) throw std::runtime_error("unknown entity: " + j.at("entity").dump());
  r.entity = *ent;

  if (j.contains("timestamp") && !j.at("timestamp").is_null()) {
    auto t = parse_rfc3339(j.at("timestamp").get<std::string>());
    if (!t) throw std::runtime_error("bad timestamp: " + j.at("timestamp").dump());
    r.timestamp = *t;
  }
  if (r.entity != Entity::kPersonal && !r.timestamp) {
    throw std::runtime_error(std::string("missing timestamp for entity ") +
                             entity_name(r.entity));
  }
  if (j.contains("encounter_id") && !j.at("encounter_id").is_null()) {
    r.encounter_id = scalar_to_string(j.at("encounter_id"));
  }

  if (r.entity == Entity::kForm) {
    if (!j.contains("form_pairs") || !j.at("form_pairs").is_array()) {
      throw std::runtime_error("form entity requires form_pairs");
    }
    for (const auto& pair : j.at("form_pairs")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw std::runtime_error("form pair must be [key, value]");
      }
      r.form_pairs.emplace_back(scalar_to_string(pair[0]), scalar_to_string(pair[1]));
    }
    if (j.contains("payload") && !j.at("payload").empty()) {
      throw std::runtime_error("form entity must not carry a payload");
    }
  } else {
    if (j.contains("form_pairs")) {
      throw std::runtime_error("form_pairs on non-form entity");
    }
    if (j.contains("payload")) {
      if (!j.at("payload").is_object()) throw std::runtime_error("payload must be an object");
      flatten_payload(j.at("payload"), "", r.payload);
    }
  }
  return r;
}

Admission admission_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("not an object");
  for (const char* field : {"patient_id", "admission_id", "start", "end", "created_at"}) {
    if (!j.contains(field)) throw std::runtime_error(std::string("missing ") + field);
  }
  Admission a;
  a.patient_id = scalar_to_string(j.at("patient_id"));
  a.admission_id = scalar_to_string(j.at("admission_id"));
  auto parse_instant = [&](const char* field) -> Instant {
    auto t = parse_rfc3339(j.at(field).get<std::string>());
    if (!t) throw std::runtime_error(std::string("bad ") + field);
    return *t;
  };
  a.start = parse_instant("start");
  a.end = parse_instant("end");
  a.created_at = parse_instant("created_at");
  if (a.start > a.end) throw std::runtime_error("start after end");
  a.died = j.value("died", false);
  a.against_medical_advice = j.value("against_medical_advice", false);
  a.transferred = j.value("transferred", false);
  if (j.contains("prereg_created_at") && !j.at("prereg_created_at").is_null()) {
    auto t = parse_rfc3339(j.at("prereg_created_at").get<std::string>());
    if (!t) throw std::runtime_error("bad prereg_created_at");
    a.prereg_created_at = *t;
  }
  return a;
}

template <typename T, typename FromJson>
void parse_lines(std::istream& in, FromJson from_json, std::vector<T>& out,
                 std::vector<MalformedLine>& errors) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      out.push_back(from_json(j));
    } catch (const std::exception& e) {
      if (line_no == 1) throw FatalFormat(std::string("line 1: ") + e.what());
      errors.push_back({line_no, e.what()});
    }
  }
}

}  // namespace

ParseResult parse_records(std::istream& in) {
  ParseResult result;
  parse_lines(in, record_from_json, result.records, result.errors);
  return result;
}

AdmissionParseResult parse_admissions(std::istream& in) {
  AdmissionParseResult result;
  parse_lines(in, admission_from_json, result.admissions, result.errors);
  return result;
}

ParseResult parse_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FatalFormat("cannot open events file: " + path);
  return parse_records(in);
}

AdmissionParseResult parse_admissions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FatalFormat("cannot open admissions file: " + path);
  return parse_admissions(in);
}

std::string serialize_record(const EventRecord& r) {
  json j;
  j["patient_id"] = r.patient_id;
  j["entity"] = entity_name(r.entity);
  if (r.timestamp) j["timestamp"] = format_rfc3339(*r.timestamp);
  if (r.encounter_id) j["encounter_id"] = *r.encounter_id;
  if (r.entity == Entity::kForm) {
    json pairs = json::array();
    for (const auto& [k, v] : r.form_pairs) pairs.push_back(json::array({k, v}));
    j["form_pairs"] = pairs;
  } else if (!r.payload.empty()) {
    json payload = json::object();
    for (const auto& [k, v] : r.payload) payload[k] = v;
    j["payload"] = payload;
  }
  return j.dump();
}

std::string serialize_admission(const Admission& a) {
  json j;
  j["patient_id"] = a.patient_id;
  j["admission_id"] = a.admission_id;
  j["start"] = format_rfc3339(a.start);
  j["end"] = format_rfc3339(a.end);
  j["created_at"] = format_rfc3339(a.created_at);
  j["died"] = a.died;
  j["against_medical_advice"] = a.against_medical_advice;
  j["transferred"] = a.transferred;
  if (a.prereg_created_at) j["prereg_created_at"] = format_rfc3339(*a.prereg_created_at);
  return j.dump();
}

std::vector<PatientHistory> group_by_patient(const std::vector<EventRecord>& records,
                                             const std::vector<Admission>& admissions) {
  std::map<std::string, PatientHistory> by_patient;
  for (const auto& r : records) {
    auto& h = by_patient[r.patient_id];
    h.patient_id = r.patient_id;
    h.events.push_back(r);
  }
  for (const auto& a : admissions) {
    auto& h = by_patient[a.patient_id];
    h.patient_id = a.patient_id;
    h.admissions.push_back(a);
  }
  std::vector<PatientHistory> out;
  out.reserve(by_patient.size());
  for (auto& [id, h] : by_patient) {
    // Timestampless (personal) events sort before all timestamped ones;
    // featurize anchors them at encode time.
    std::stable_sort(h.events.begin(), h.events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                       std::int64_t ta = a.timestamp ? *a.timestamp : INT64_MIN;
                       std::int64_t tb = b.timestamp ? *b.timestamp : INT64_MIN;
                       return ta < tb;
                     });
    std::stable_sort(h.admissions.begin(), h.admissions.end(),
                     [](const Admission& a, const Admission& b) {
                       if (a.start != b.start) return a.start < b.start;
                       return a.admission_id < b.admission_id;
                     });
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace rdmt
