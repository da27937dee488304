#include "rdmt/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "rdmt/hash.hpp"

namespace rdmt {

using nlohmann::json;

SignalKind signal_kind_from_name(const std::string& name) {
  if (name == "none") return SignalKind::kNone;
  if (name == "token") return SignalKind::kToken;
  if (name == "temporal") return SignalKind::kTemporal;
  throw std::invalid_argument("unknown signal kind: " + name);
}

const char* signal_kind_name(SignalKind k) {
  switch (k) {
    case SignalKind::kNone: return "none";
    case SignalKind::kToken: return "token";
    case SignalKind::kTemporal: return "temporal";
  }
  return "?";
}

namespace {

constexpr Instant kReferenceNow = 1546214400;  // 2018-12-31T00:00:00Z
constexpr const char* kTokenMarker = "sentinela";
constexpr const char* kTemporalFirst = "alfa";
constexpr const char* kTemporalSecond = "beta";

enum class ClusterType {
  kPositivePair,
  kNegativeAlone,
  kPlannedReadmit,
  kInvalidReadmit,
  kGap31,
  kInvalidAlone,
};

struct ClusterWeights {
  double positive_pair = 0.0;
  double negative_alone = 0.0;
  double planned = 0.0;
  double invalid_readmit = 0.0;
  double gap31 = 0.0;
  double invalid_alone = 0.0;

  // Probability that a pair cluster's first example must mimic the signal
  // history depth of a second-anchor example (see decoy planting).
  double decoy_theta = 0.0;
};

// Solve the positive-pair probability so the expected example-level positive
// rate matches the target: each pair cluster yields 1 positive + 1 negative
// example, planned/gap31 yield 2 negatives, alone/invalid_readmit yield 1.
ClusterWeights solve_weights(const SynthConfig& c) {
  ClusterWeights w;
  w.planned = c.planned_weight;
  w.invalid_readmit = c.invalid_readmit_weight;
  w.gap31 = c.gap31_weight;
  w.invalid_alone = c.invalid_alone_weight;
  const double aux_prob = w.planned + w.invalid_readmit + w.gap31 + w.invalid_alone;
  const double fixed_examples =
      1.0 - aux_prob + 2.0 * w.planned + w.invalid_readmit + 2.0 * w.gap31;
  const double r = c.target_positive_rate;
  if (r <= 0.0 || r >= 1.0) {
    throw std::invalid_argument("target_positive_rate must be in (0,1)");
  }
  w.positive_pair = fixed_examples * r / (1.0 - r);
  w.negative_alone = 1.0 - w.positive_pair - aux_prob;
  if (w.negative_alone < 0.0) {
    throw std::invalid_argument("target_positive_rate too high for cluster weights");
  }
  const double m_single = w.negative_alone + w.invalid_readmit;
  const double m_second = w.positive_pair + w.planned + w.gap31;
  w.decoy_theta = m_second / (m_single + m_second);
  return w;
}

ClusterType sample_cluster(const ClusterWeights& w, Rng& rng) {
  double u = rng.next_double();
  if ((u -= w.positive_pair) < 0) return ClusterType::kPositivePair;
  if ((u -= w.negative_alone) < 0) return ClusterType::kNegativeAlone;
  if ((u -= w.planned) < 0) return ClusterType::kPlannedReadmit;
  if ((u -= w.invalid_readmit) < 0) return ClusterType::kInvalidReadmit;
  if ((u -= w.gap31) < 0) return ClusterType::kGap31;
  return ClusterType::kInvalidAlone;
}

std::vector<std::string> build_token_pool(int size, std::uint64_t seed) {
  static constexpr std::array<const char*, 20> syllables = {
      "ba", "ce", "di", "fo", "gu", "la", "me", "ni", "po", "ra",
      "so", "tu", "ve", "xi", "zo", "car", "men", "tor", "cal", "lun"};
  Rng rng(seed);
  std::set<std::string> seen = {kTokenMarker, kTemporalFirst, kTemporalSecond};
  std::vector<std::string> pool;
  pool.reserve(static_cast<std::size_t>(size));
  while (static_cast<int>(pool.size()) < size) {
    std::string word;
    const int parts = 2 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < parts; ++i) word += syllables[rng.next_below(syllables.size())];
    if (seen.insert(word).second) pool.push_back(std::move(word));
  }
  return pool;
}

struct PatientGen {
  const SynthConfig& cfg;
  const ClusterWeights& weights;
  const std::vector<std::string>& pool;
  std::string patient_id;
  Rng rng;
  SynthOutput& out;
  int admission_counter = 0;

  const std::string& noise_token() { return pool[rng.next_below(pool.size())]; }

  std::string phrase(int min_words, int max_words) {
    const int n =
        min_words + static_cast<int>(rng.next_below(
                        static_cast<std::uint64_t>(max_words - min_words + 1)));
    std::string s;
    for (int i = 0; i < n; ++i) {
      if (!s.empty()) s += " ";
      if (rng.next_double() < 0.08) {
        s += std::to_string(rng.next_below(200));
      } else {
        s += noise_token();
      }
    }
    return s;
  }

  Instant rand_instant(Instant lo, Instant hi) {
    return lo + static_cast<Instant>(rng.next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  void personal_record() {
    EventRecord r;
    r.patient_id = patient_id;
    r.entity = Entity::kPersonal;
    r.payload["birth_date"] = std::to_string(1930 + rng.next_below(80));
    r.payload["nationality"] = rng.next_double() < 0.8 ? "chilena" : "extranjera";
    r.payload["sex"] = rng.next_double() < 0.5 ? "f" : "m";
    out.events.push_back(std::move(r));
  }

  void noise_event(Instant t) {
    EventRecord r;
    r.patient_id = patient_id;
    r.timestamp = t;
    double u = rng.next_double() *
               (cfg.problem_weight + cfg.encounter_weight + cfg.diagnosis_weight +
                cfg.order_weight + cfg.note_weight + cfg.form_weight);
    if ((u -= cfg.problem_weight) < 0) {
      r.entity = Entity::kProblem;
      r.payload["name"] = phrase(1, 3);
      r.payload["status"] = rng.next_double() < 0.6 ? "activo" : "resuelto";
    } else if ((u -= cfg.encounter_weight) < 0) {
      r.entity = Entity::kEncounter;
      r.payload["reason.text"] = phrase(2, 5);
      r.payload["type"] = rng.next_double() < 0.7 ? "consulta" : "urgencia";
    } else if ((u -= cfg.diagnosis_weight) < 0) {
      r.entity = Entity::kDiagnosis;
      r.payload["code"] = "c" + std::to_string(rng.next_below(500));
      r.payload["description.text"] = phrase(2, 6);
      r.encounter_id = patient_id + "-e" + std::to_string(rng.next_below(1000));
    } else if ((u -= cfg.order_weight) < 0) {
      r.entity = Entity::kOrder;
      r.payload["medication.categorical_text"] = noise_token();
      r.payload["category"] = rng.next_double() < 0.5 ? "farmaco" : "examen";
    } else if ((u -= cfg.note_weight) < 0) {
      r.entity = Entity::kClinicalNote;
      r.payload["content.text"] = phrase(4, 10);
    } else {
      r.entity = Entity::kForm;
      const int pairs = 1 + static_cast<int>(rng.next_below(3));
      for (int i = 0; i < pairs; ++i) {
        static constexpr std::array<const char*, 5> keys = {
            "signos vitales", "presion arterial", "temperatura corporal",
            "estado general", "frecuencia cardiaca"};
        r.form_pairs.emplace_back(keys[rng.next_below(keys.size())], phrase(1, 3));
      }
    }
    out.events.push_back(std::move(r));
  }

  void signal_note(Instant t, const char* word, AdmissionIntent& intent) {
    EventRecord r;
    r.patient_id = patient_id;
    r.entity = Entity::kClinicalNote;
    r.timestamp = t;
    r.payload["content.text"] = word;
    out.events.push_back(std::move(r));
    intent.signal_positions.push_back(t);
  }

  // How an example sits in its cluster. Second anchors inherit every signal
  // event the first anchor planted, which matters for count balancing.
  enum class AnchorRole { kSingleton, kPairFirst, kPairSecond };

  // alfa-then-beta encodes label 1; beta-then-alfa encodes label 0.
  void temporal_pattern(Instant early, Instant late, int order, AdmissionIntent& intent) {
    signal_note(early, order == 1 ? kTemporalFirst : kTemporalSecond, intent);
    signal_note(late, order == 1 ? kTemporalSecond : kTemporalFirst, intent);
  }

  void plant_signal(const Admission& a, AdmissionIntent& intent, AnchorRole role) {
    const Instant anchor = a.start;
    if (cfg.signal == SignalKind::kToken) {
      if (intent.intended_label == 1) {
        const std::array<std::pair<int, int>, 3> slots = {
            std::pair{2, 8}, std::pair{12, 20}, std::pair{24, 34}};
        for (const auto& [lo, hi] : slots) {
          if (rng.next_double() < cfg.signal_q) {
            signal_note(anchor - rand_instant(lo * kSecondsPerHour, hi * kSecondsPerHour),
                        kTokenMarker, intent);
          }
        }
      }
      return;
    }
    if (cfg.signal != SignalKind::kTemporal) return;

    // Fresh pattern inside the most recent day and a half; its order is the
    // label. Older patterns are count balancers: a pair's second anchor sees
    // the first anchor's whole pattern set on top of its own fresh pair, so
    // pair-first examples draw Geometric(theta) decoy patterns and singleton
    // examples draw none, which makes the visible signal-token count
    // independent of the label. A bag-of-words view then carries no signal;
    // only the order of the fresh pattern does.
    temporal_pattern(anchor - rand_instant(26 * kSecondsPerHour, 34 * kSecondsPerHour),
                     anchor - rand_instant(4 * kSecondsPerHour, 10 * kSecondsPerHour),
                     intent.intended_label, intent);
    if (role == AnchorRole::kPairFirst) {
      int decoys = 0;
      while (rng.next_double() < weights.decoy_theta) ++decoys;
      for (int i = 0; i < decoys; ++i) {
        const Instant early =
            anchor - rand_instant(28 * kSecondsPerDay, 44 * kSecondsPerDay);
        const Instant late = early + rand_instant(2 * kSecondsPerHour, 12 * kSecondsPerHour);
        temporal_pattern(early, late, rng.next_double() < 0.5 ? 1 : 0, intent);
      }
    }
  }

  Admission make_admission(Instant start, Instant stay_seconds) {
    Admission a;
    a.patient_id = patient_id;
    a.admission_id = patient_id + "-a" + std::to_string(admission_counter++);
    a.start = start;
    a.end = start + stay_seconds;
    a.created_at = start;
    return a;
  }

  void set_prereg_unplanned(Admission& a) {
    const double u = rng.next_double();
    if (u < 0.70) return;  // no prereg
    if (u < 0.88) {
      a.prereg_created_at = a.created_at - rand_instant(0, 24 * kSecondsPerHour - 1);
    } else {
      a.prereg_created_at = a.created_at - 24 * kSecondsPerHour;  // boundary: unplanned
      ++out.stats.exact_24h_preregs;
    }
  }

  void set_prereg_planned(Admission& a) {
    if (rng.next_double() < 0.2) {
      a.prereg_created_at = a.created_at - (24 * kSecondsPerHour + 1);  // just planned
    } else {
      a.prereg_created_at =
          a.created_at - rand_instant(24 * kSecondsPerHour + 1, 7 * kSecondsPerDay);
    }
  }

  void make_invalid(Admission& a) {
    switch (rng.next_below(3)) {
      case 0: a.died = true; break;
      case 1: a.against_medical_advice = true; break;
      default: a.transferred = true; break;
    }
  }

  void encounter_at_admission(const Admission& a) {
    EventRecord r;
    r.patient_id = patient_id;
    r.entity = Entity::kEncounter;
    r.timestamp = a.start;
    r.encounter_id = a.admission_id;
    r.payload["reason.text"] = phrase(2, 5);
    r.payload["type"] = "hospitalizacion";
    out.events.push_back(std::move(r));
  }

  void emit(const Admission& a, bool is_example, int label, AnchorRole role) {
    out.admissions.push_back(a);
    AdmissionIntent intent;
    intent.admission_id = a.admission_id;
    intent.patient_id = patient_id;
    intent.is_example = is_example;
    intent.intended_label = label;
    if (is_example) {
      encounter_at_admission(a);
      plant_signal(a, intent, role);
      ++out.stats.examples;
      out.stats.positives += static_cast<std::size_t>(label);
    }
    out.manifest.push_back(std::move(intent));
  }

  Instant positive_gap() {
    if (rng.next_double() < 0.12) {
      ++out.stats.exact_30d_gaps;
      return 30 * kSecondsPerDay;  // boundary: still within the horizon
    }
    return in_horizon_gap();
  }

  // Temporal mode keeps pair gaps long so a second anchor's fresh pattern
  // cannot predate the first anchor.
  Instant in_horizon_gap() {
    if (cfg.signal == SignalKind::kTemporal) {
      return rand_instant(25 * kSecondsPerDay, 30 * kSecondsPerDay - 1);
    }
    return rand_instant(kSecondsPerHour, 30 * kSecondsPerDay - 1);
  }

  // Returns the end instant of the cluster's last admission.
  Instant emit_cluster(ClusterType type, Instant start) {
    const Instant stay = rand_instant(kSecondsPerDay, 10 * kSecondsPerDay);
    Admission first = make_admission(start, stay);
    switch (type) {
      case ClusterType::kNegativeAlone: {
        if (rng.next_double() < 0.3) set_prereg_planned(first);
        else set_prereg_unplanned(first);
        emit(first, true, 0, AnchorRole::kSingleton);
        return first.end;
      }
      case ClusterType::kInvalidAlone: {
        make_invalid(first);
        set_prereg_unplanned(first);
        emit(first, false, 0, AnchorRole::kSingleton);
        return first.end;
      }
      case ClusterType::kPositivePair: {
        set_prereg_unplanned(first);
        emit(first, true, 1, AnchorRole::kPairFirst);
        Admission second = make_admission(first.end + positive_gap(),
                                          rand_instant(kSecondsPerDay, 10 * kSecondsPerDay));
        set_prereg_unplanned(second);  // must stay unplanned to flip the label
        emit(second, true, 0, AnchorRole::kPairSecond);
        return second.end;
      }
      case ClusterType::kPlannedReadmit: {
        set_prereg_unplanned(first);
        emit(first, true, 0, AnchorRole::kPairFirst);
        Admission second = make_admission(first.end + in_horizon_gap(),
                                          rand_instant(kSecondsPerDay, 10 * kSecondsPerDay));
        set_prereg_planned(second);  // planned, so it cannot flip the label
        emit(second, true, 0, AnchorRole::kPairSecond);
        return second.end;
      }
      case ClusterType::kInvalidReadmit: {
        set_prereg_unplanned(first);
        emit(first, true, 0, AnchorRole::kSingleton);
        Admission second = make_admission(first.end + in_horizon_gap(),
                                          rand_instant(kSecondsPerDay, 10 * kSecondsPerDay));
        make_invalid(second);
        set_prereg_unplanned(second);
        emit(second, false, 0, AnchorRole::kSingleton);
        return second.end;
      }
      case ClusterType::kGap31: {
        set_prereg_unplanned(first);
        emit(first, true, 0, AnchorRole::kPairFirst);
        Instant gap = rng.next_double() < 0.15
                          ? 30 * kSecondsPerDay + 1  // just outside the horizon
                          : rand_instant(30 * kSecondsPerDay + 1, 45 * kSecondsPerDay);
        Admission second = make_admission(first.end + gap,
                                          rand_instant(kSecondsPerDay, 10 * kSecondsPerDay));
        set_prereg_unplanned(second);
        emit(second, true, 0, AnchorRole::kPairSecond);
        return second.end;
      }
    }
    return first.end;
  }

  void run() {
    personal_record();

    const Instant span_start = kReferenceNow - cfg.span_days * kSecondsPerDay;
    const int n_events =
        cfg.events_per_patient_min +
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
            cfg.events_per_patient_max - cfg.events_per_patient_min + 1)));
    for (int i = 0; i < n_events; ++i) {
      noise_event(rand_instant(span_start, kReferenceNow));
    }

    // Clusters are separated by horizon + 1 day so no admission can affect
    // another cluster's label.
    Instant t = span_start +
                rand_instant(10 * kSecondsPerDay, cfg.span_days / 3 * kSecondsPerDay);
    const Instant clearance = 31 * kSecondsPerDay;
    for (int c = 0; c < 2; ++c) {
      if (t + 60 * kSecondsPerDay > kReferenceNow) break;
      ClusterType type = sample_cluster(weights, rng);
      Instant last_end = emit_cluster(type, t);
      t = last_end + clearance + rand_instant(kSecondsPerDay, 60 * kSecondsPerDay);
      if (c == 0 && rng.next_double() >= cfg.second_cluster_prob) break;
    }
  }
};

}  // namespace

SynthOutput generate(const SynthConfig& config) {
  const ClusterWeights weights = solve_weights(config);
  const std::vector<std::string> pool =
      build_token_pool(config.token_pool, splitmix64(config.seed ^ 0x706f6f6cull));

  SynthOutput out;
  for (int i = 0; i < config.n_patients; ++i) {
    std::string patient_id = "p" + std::to_string(i);
    PatientGen gen{config, weights, pool, patient_id,
                   Rng(seeded_hash(patient_id, config.seed)), out};
    gen.run();
  }
  return out;
}

void write_synth_files(const SynthOutput& out, const std::string& events_path,
                       const std::string& admissions_path,
                       const std::string& manifest_path) {
  {
    std::ofstream f(events_path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + events_path);
    for (const auto& r : out.events) f << serialize_record(r) << "\n";
  }
  {
    std::ofstream f(admissions_path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + admissions_path);
    for (const auto& a : out.admissions) f << serialize_admission(a) << "\n";
  }
  {
    std::ofstream f(manifest_path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + manifest_path);
    for (const auto& m : out.manifest) {
      json j;
      j["admission_id"] = m.admission_id;
      j["patient_id"] = m.patient_id;
      j["is_example"] = m.is_example;
      j["intended_label"] = m.intended_label;
      json positions = json::array();
      for (Instant t : m.signal_positions) positions.push_back(format_rfc3339(t));
      j["signal_positions"] = positions;
      f << j.dump() << "\n";
    }
  }
}

std::vector<AdmissionIntent> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest: " + path);
  std::vector<AdmissionIntent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    AdmissionIntent m;
    m.admission_id = j.at("admission_id").get<std::string>();
    m.patient_id = j.at("patient_id").get<std::string>();
    m.is_example = j.at("is_example").get<bool>();
    m.intended_label = j.at("intended_label").get<int>();
    for (const auto& p : j.at("signal_positions")) {
      m.signal_positions.push_back(*parse_rfc3339(p.get<std::string>()));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<LabelDiscrepancy> verify_labels(const std::vector<AdmissionIntent>& intents,
                                            const std::vector<Example>& examples) {
  std::map<std::string, int> observed;
  for (const Example& e : examples) observed[e.anchor_admission_id] = e.label;

  std::vector<LabelDiscrepancy> out;
  std::set<std::string> known;
  for (const AdmissionIntent& m : intents) {
    known.insert(m.admission_id);
    auto it = observed.find(m.admission_id);
    if (m.is_example && it == observed.end()) {
      out.push_back({m.admission_id, "expected an example, none produced"});
    } else if (!m.is_example && it != observed.end()) {
      out.push_back({m.admission_id, "unexpected example for invalid admission"});
    } else if (m.is_example && it->second != m.intended_label) {
      out.push_back({m.admission_id,
                     "label mismatch: intended " + std::to_string(m.intended_label) +
                         ", got " + std::to_string(it->second)});
    }
  }
  for (const auto& [id, label] : observed) {
    if (!known.contains(id)) {
      out.push_back({id, "example for an admission absent from the manifest"});
    }
  }
  return out;
}

}  // namespace rdmt
