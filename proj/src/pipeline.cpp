#include "rdmt/pipeline.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rdmt/baseline.hpp"
#include "rdmt/hash.hpp"
#include "rdmt/metrics.hpp"
#include "rdmt/synth.hpp"

namespace rdmt {

namespace fs = std::filesystem;
using nlohmann::json;

WorkdirLock::WorkdirLock(const std::string& workdir) {
  fs::create_directories(workdir);
  path_ = workdir + "/.lock";
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw std::runtime_error("workdir is locked by another run (remove " + path_ +
                             " if that run is gone)");
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] ssize_t n = ::write(fd, pid.c_str(), pid.size());
  ::close(fd);
}

WorkdirLock::~WorkdirLock() { ::unlink(path_.c_str()); }

std::string workdir_file(const RunConfig& cfg, const std::string& name) {
  return cfg.workdir + "/" + name;
}

std::string events_artifact(const RunConfig& cfg) {
  return cfg.events_path.empty() ? workdir_file(cfg, "events.jsonl") : cfg.events_path;
}

std::string admissions_artifact(const RunConfig& cfg) {
  return cfg.admissions_path.empty() ? workdir_file(cfg, "admissions.jsonl")
                                     : cfg.admissions_path;
}

void write_config_echo(const RunConfig& cfg) {
  fs::create_directories(cfg.workdir);
  std::ofstream out(workdir_file(cfg, "config.echo.txt"), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write config echo");
  for (const auto& [key, value] : cfg.items()) out << key << " = " << value << "\n";
}

// ---------------------------------------------------------------------------
// Stage manifests and digest validation
// ---------------------------------------------------------------------------

namespace {

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// Which stage produces which workdir artifact.
const std::map<std::string, std::string>& producer_table() {
  static const std::map<std::string, std::string> table = {
      {"events.jsonl", "synth"},
      {"admissions.jsonl", "synth"},
      {"synth_manifest.jsonl", "synth"},
      {"examples.jsonl", "cohort"},
      {"split.tsv", "cohort"},
      {"vocab.txt", "vocab"},
      {"model.ckpt", "train"},
      {"baseline.bin", "train-baseline"},
  };
  return table;
}

std::optional<json> load_stage_manifest(const RunConfig& cfg, const std::string& stage) {
  std::ifstream in(workdir_file(cfg, "manifest_" + stage + ".json"));
  if (!in) return std::nullopt;
  json j;
  in >> j;
  return j;
}

// A running stage: collects input/output digests and writes its manifest.
class StageRun {
 public:
  StageRun(const RunConfig& cfg, std::string stage)
      : cfg_(cfg), stage_(std::move(stage)), started_(now_seconds()) {
    fs::create_directories(cfg.workdir);
  }

  // Registers an input; the file must exist and, when a producing stage's
  // manifest is present, its recorded output digest must match.
  std::string input(const std::string& path) {
    if (!fs::exists(path)) {
      throw MissingArtifact(stage_ + ": missing input artifact " + path +
                            " (run the producing stage first)");
    }
    const std::string name = fs::path(path).filename().string();
    const std::string digest = file_digest(path);
    auto producer = producer_table().find(name);
    if (producer != producer_table().end()) {
      if (auto manifest = load_stage_manifest(cfg_, producer->second)) {
        const auto& outputs = manifest->at("outputs");
        if (outputs.contains(name) && outputs.at(name).get<std::string>() != digest) {
          throw DigestMismatch(stage_ + ": input " + name +
                               " is stale relative to the " + producer->second +
                               " stage manifest (rerun downstream stages in order)");
        }
      }
    }
    inputs_[name] = digest;
    return digest;
  }

  // Cross-stage chain check: the producing stage must have consumed the same
  // bytes this stage sees now.
  void require_chain(const std::string& producer_stage, const std::string& input_name) {
    auto manifest = load_stage_manifest(cfg_, producer_stage);
    if (!manifest) return;
    const auto& produced_inputs = manifest->at("inputs");
    if (!produced_inputs.contains(input_name)) return;
    auto it = inputs_.find(input_name);
    if (it == inputs_.end()) return;
    if (produced_inputs.at(input_name).get<std::string>() != it->second) {
      throw DigestMismatch(stage_ + ": " + producer_stage + " output is stale: it was " +
                           "built from a different " + input_name + " (rerun " +
                           producer_stage + ")");
    }
  }

  void output(const std::string& path) {
    outputs_[fs::path(path).filename().string()] = file_digest(path);
  }

  void finish(json config_used = json::object()) {
    json j;
    j["stage"] = stage_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["config"] = std::move(config_used);
    j["duration_seconds"] = now_seconds() - started_;
    std::ofstream out(workdir_file(cfg_, "manifest_" + stage_ + ".json"), std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write stage manifest for " + stage_);
    out << j.dump(2) << "\n";
  }

  json& extra() { return extra_; }
  void set_extra(const std::string& key, const json& value) { extra_[key] = value; }

  void finish_with_extra(json config_used = json::object()) {
    json j;
    j["stage"] = stage_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["config"] = std::move(config_used);
    for (auto& [k, v] : extra_.items()) j[k] = v;
    j["duration_seconds"] = now_seconds() - started_;
    std::ofstream out(workdir_file(cfg_, "manifest_" + stage_ + ".json"), std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write stage manifest for " + stage_);
    out << j.dump(2) << "\n";
  }

 private:
  const RunConfig& cfg_;
  std::string stage_;
  double started_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  json extra_ = json::object();
};

json config_subset(const RunConfig& cfg, std::initializer_list<const char*> prefixes) {
  json j = json::object();
  for (const auto& [key, value] : cfg.items()) {
    for (const char* p : prefixes) {
      if (key.rfind(p, 0) == 0) {
        j[key] = value;
        break;
      }
    }
  }
  return j;
}

struct LoadedCohort {
  std::vector<Example> examples;
  std::map<std::string, Split> split;
  std::vector<Example> train, validation, test;
};

LoadedCohort load_cohort(StageRun& run, const RunConfig& cfg) {
  LoadedCohort c;
  const std::string examples_path = workdir_file(cfg, "examples.jsonl");
  const std::string split_path = workdir_file(cfg, "split.tsv");
  run.input(examples_path);
  run.input(split_path);
  c.examples = read_examples_file(examples_path);
  c.split = read_split_file(split_path);
  for (const Example& e : c.examples) {
    auto it = c.split.find(e.patient_id);
    if (it == c.split.end()) {
      throw DigestMismatch("patient " + e.patient_id + " missing from split.tsv");
    }
    switch (it->second) {
      case Split::kTrain: c.train.push_back(e); break;
      case Split::kValidation: c.validation.push_back(e); break;
      case Split::kTest: c.test.push_back(e); break;
    }
  }
  return c;
}

const std::vector<Example>& split_of(const LoadedCohort& c, const std::string& name) {
  if (name == "train") return c.train;
  if (name == "validation") return c.validation;
  if (name == "test") return c.test;
  throw ConfigInvalid("unknown split: " + name + " (expected train|validation|test)");
}

}  // namespace

// ---------------------------------------------------------------------------
// Examples / split file formats
// ---------------------------------------------------------------------------

void write_examples_file(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write examples file: " + path);
  for (const Example& e : examples) {
    json j;
    j["patient_id"] = e.patient_id;
    j["anchor_admission_id"] = e.anchor_admission_id;
    j["anchor_time"] = format_rfc3339(e.anchor_time);
    j["label"] = e.label;
    json events = json::array();
    for (const EventRecord& r : e.history) events.push_back(json::parse(serialize_record(r)));
    j["events"] = std::move(events);
    out << j.dump() << "\n";
  }
}

std::vector<Example> read_examples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read examples file: " + path);
  std::vector<Example> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Example e;
    e.patient_id = j.at("patient_id").get<std::string>();
    e.anchor_admission_id = j.at("anchor_admission_id").get<std::string>();
    auto t = parse_rfc3339(j.at("anchor_time").get<std::string>());
    if (!t) throw std::runtime_error("bad anchor_time in " + path);
    e.anchor_time = *t;
    e.label = j.at("label").get<int>();
    std::istringstream events_in;
    for (const auto& ev : j.at("events")) {
      std::istringstream one(ev.dump());
      ParseResult r = parse_records(one);
      if (!r.errors.empty()) {
        throw std::runtime_error("bad event in examples file: " + r.errors[0].reason);
      }
      e.history.push_back(std::move(r.records[0]));
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_split_file(const std::string& path, const SplitAssignment& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write split file: " + path);
  for (const auto& [patient, s] : split.by_patient) {
    out << patient << "\t" << split_name(s) << "\n";
  }
}

std::map<std::string, Split> read_split_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read split file: " + path);
  std::map<std::string, Split> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("bad split line: " + line);
    const std::string name = line.substr(tab + 1);
    Split s;
    if (name == "train") s = Split::kTrain;
    else if (name == "validation") s = Split::kValidation;
    else if (name == "test") s = Split::kTest;
    else throw std::runtime_error("bad split name: " + name);
    out[line.substr(0, tab)] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

void stage_synth(const RunConfig& cfg) {
  write_config_echo(cfg);
  StageRun run(cfg, "synth");
  SynthOutput out = generate(cfg.synth_config());
  const std::string events = workdir_file(cfg, "events.jsonl");
  const std::string admissions = workdir_file(cfg, "admissions.jsonl");
  const std::string manifest = workdir_file(cfg, "synth_manifest.jsonl");
  write_synth_files(out, events, admissions, manifest);
  run.output(events);
  run.output(admissions);
  run.output(manifest);
  run.set_extra("stats", json{{"examples", out.stats.examples},
                              {"positives", out.stats.positives},
                              {"exact_24h_preregs", out.stats.exact_24h_preregs},
                              {"exact_30d_gaps", out.stats.exact_30d_gaps}});
  run.finish_with_extra(config_subset(cfg, {"synth.", "seed"}));
}

void stage_cohort(const RunConfig& cfg) {
  write_config_echo(cfg);
  StageRun run(cfg, "cohort");
  const std::string events_path = events_artifact(cfg);
  const std::string admissions_path = admissions_artifact(cfg);
  run.input(events_path);
  run.input(admissions_path);

  ParseResult events = parse_records_file(events_path);
  AdmissionParseResult admissions = parse_admissions_file(admissions_path);
  for (const auto& e : events.errors) {
    std::cerr << "events.jsonl:" << e.line_no << ": " << e.reason << "\n";
  }
  for (const auto& e : admissions.errors) {
    std::cerr << "admissions.jsonl:" << e.line_no << ": " << e.reason << "\n";
  }

  std::vector<PatientHistory> histories =
      group_by_patient(events.records, admissions.admissions);
  std::vector<Example> examples;
  std::vector<ChronologyIssue> issues;
  for (const PatientHistory& h : histories) {
    std::vector<Example> es = build_examples(h, cfg.cohort_config(), &issues);
    examples.insert(examples.end(), std::make_move_iterator(es.begin()),
                    std::make_move_iterator(es.end()));
  }
  for (const auto& issue : issues) {
    std::cerr << "admission " << issue.admission_id << ": " << issue.reason << "\n";
  }

  SplitAssignment split =
      split_by_patient(examples, cfg.effective_split_seed(), cfg.split_ratios());

  const std::string examples_path = workdir_file(cfg, "examples.jsonl");
  const std::string split_path = workdir_file(cfg, "split.tsv");
  write_examples_file(examples_path, examples);
  write_split_file(split_path, split);
  run.output(examples_path);
  run.output(split_path);
  run.set_extra("stats",
                json{{"examples", examples.size()},
                     {"malformed_event_lines", events.errors.size()},
                     {"malformed_admission_lines", admissions.errors.size()},
                     {"chronology_issues", issues.size()}});
  run.finish_with_extra(config_subset(cfg, {"cohort.", "split.", "seed"}));
}

void stage_vocab(const RunConfig& cfg) {
  write_config_echo(cfg);
  StageRun run(cfg, "vocab");
  const std::string events_path = events_artifact(cfg);
  const std::string admissions_path = admissions_artifact(cfg);
  const std::string split_path = workdir_file(cfg, "split.tsv");
  run.input(events_path);
  run.input(admissions_path);
  run.input(split_path);

  ParseResult events = parse_records_file(events_path);
  AdmissionParseResult admissions = parse_admissions_file(admissions_path);
  std::map<std::string, Split> split = read_split_file(split_path);

  std::vector<PatientHistory> histories =
      group_by_patient(events.records, admissions.admissions);
  std::vector<PatientHistory> train_histories;
  for (auto& h : histories) {
    auto it = split.find(h.patient_id);
    if (it != split.end() && it->second == Split::kTrain) {
      train_histories.push_back(std::move(h));
    }
  }
  Vocabulary vocab = build_vocab(train_histories, cfg.featurize_min_token_count,
                                 cfg.featurize_max_features);
  const std::string vocab_path = workdir_file(cfg, "vocab.txt");
  save_vocab(vocab, vocab_path);
  run.output(vocab_path);
  run.set_extra("stats", json{{"tokens", vocab.token_count()},
                              {"features", vocab.feature_count()},
                              {"train_patients", train_histories.size()}});
  run.finish_with_extra(config_subset(cfg, {"featurize."}));
}

void stage_train(const RunConfig& cfg) {
  write_config_echo(cfg);
  StageRun run(cfg, "train");
  const std::string vocab_path = workdir_file(cfg, "vocab.txt");
  LoadedCohort cohort = load_cohort(run, cfg);
  run.input(vocab_path);
  run.require_chain("vocab", "split.tsv");
  Vocabulary vocab = load_vocab(vocab_path);

  const std::string log_path = workdir_file(cfg, "train.log");
  std::ofstream log(log_path, std::ios::trunc);
  TrainResult result =
      train_model(cohort.train, cohort.validation, vocab, cfg.train_config(), &log);
  log.close();

  const std::string ckpt_path = workdir_file(cfg, "model.ckpt");
  save_checkpoint(result.checkpoint, ckpt_path);
  run.output(ckpt_path);
  run.set_extra("stats",
                json{{"best_epoch", result.checkpoint.best_epoch},
                     {"best_val_auroc", result.checkpoint.best_val_auroc},
                     {"train_examples", result.train_examples},
                     {"realized_train_positive_rate", result.realized_train_positive_rate}});
  run.finish_with_extra(config_subset(cfg, {"model.", "featurize.", "seed"}));
}

void stage_train_baseline(const RunConfig& cfg) {
  write_config_echo(cfg);
  StageRun run(cfg, "train-baseline");
  const std::string events_path = events_artifact(cfg);
  const std::string admissions_path = admissions_artifact(cfg);
  const std::string vocab_path = workdir_file(cfg, "vocab.txt");
  run.input(events_path);
  run.input(admissions_path);
  LoadedCohort cohort = load_cohort(run, cfg);
  run.input(vocab_path);
  Vocabulary vocab = load_vocab(vocab_path);

  ParseResult events = parse_records_file(events_path);
  AdmissionParseResult admissions = parse_admissions_file(admissions_path);
  std::map<std::string, Split> split = read_split_file(workdir_file(cfg, "split.tsv"));
  std::vector<PatientHistory> histories =
      group_by_patient(events.records, admissions.admissions);
  std::vector<PatientHistory> train_histories;
  for (auto& h : histories) {
    auto it = split.find(h.patient_id);
    if (it != split.end() && it->second == Split::kTrain) {
      train_histories.push_back(std::move(h));
    }
  }

  const std::string log_path = workdir_file(cfg, "baseline_train.log");
  std::ofstream log(log_path, std::ios::trunc);
  BaselineTrainResult result = train_baseline(train_histories, cohort.train,
                                              cohort.validation, vocab,
                                              cfg.baseline_config(), &log);
  log.close();

  const std::string model_path = workdir_file(cfg, "baseline.bin");
  save_baseline(result.model, model_path);
  run.output(model_path);
  run.set_extra("stats", json{{"best_epoch", result.model.best_epoch},
                              {"best_val_auroc", result.model.best_val_auroc},
                              {"selected_tokens", result.model.selected_tokens.size()}});
  run.finish_with_extra(config_subset(cfg, {"baseline.", "seed"}));
}

void stage_eval(const RunConfig& cfg, const std::string& model, const std::string& split) {
  write_config_echo(cfg);
  StageRun run(cfg, "eval");
  const std::string vocab_path = workdir_file(cfg, "vocab.txt");
  LoadedCohort cohort = load_cohort(run, cfg);
  run.input(vocab_path);
  Vocabulary vocab = load_vocab(vocab_path);
  const std::vector<Example>& subset = split_of(cohort, split);

  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(subset.size());
  for (const Example& e : subset) labels.push_back(e.label);

  if (model == "lstm") {
    const std::string ckpt_path = workdir_file(cfg, "model.ckpt");
    run.input(ckpt_path);
    run.require_chain("train", "examples.jsonl");
    run.require_chain("train", "vocab.txt");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    for (auto& [id, p] : predict_examples(ckpt, subset, vocab)) scores.push_back(p);
  } else if (model == "baseline") {
    const std::string model_path = workdir_file(cfg, "baseline.bin");
    run.input(model_path);
    run.require_chain("train-baseline", "examples.jsonl");
    run.require_chain("train-baseline", "vocab.txt");
    TfidfModel tfidf = load_baseline(model_path);
    if (tfidf.vocab_digest != vocab_digest(vocab)) {
      throw VocabMismatch("baseline model was fitted against a different vocabulary");
    }
    for (const Example& e : subset) {
      scores.push_back(baseline_score(tfidf, collect_tokens(e.history, vocab)));
    }
  } else {
    throw ConfigInvalid("unknown model: " + model + " (expected lstm|baseline)");
  }

  EvalReport report = evaluate(scores, labels, cfg.eval_threshold);
  const std::string base = "eval_" + model + "_" + split;
  const std::string text_path = workdir_file(cfg, base + ".txt");
  const std::string json_path = workdir_file(cfg, base + ".jsonl");
  {
    std::ofstream out(text_path, std::ios::trunc);
    out << "model: " << model << "\nsplit: " << split << "\n" << render_report(report);
  }
  {
    std::ofstream out(json_path, std::ios::trunc);
    out << report_to_json(report) << "\n";
  }
  std::cout << "model: " << model << "\nsplit: " << split << "\n" << render_report(report);
  run.output(text_path);
  run.output(json_path);
  run.finish(config_subset(cfg, {"eval."}));
}

void stage_predict(const RunConfig& cfg, const std::string& model,
                   const std::string& split) {
  write_config_echo(cfg);
  StageRun run(cfg, "predict");
  const std::string vocab_path = workdir_file(cfg, "vocab.txt");
  LoadedCohort cohort = load_cohort(run, cfg);
  run.input(vocab_path);
  Vocabulary vocab = load_vocab(vocab_path);
  const std::vector<Example>& subset = split_of(cohort, split);

  std::vector<std::pair<std::string, double>> predictions;
  if (model == "lstm") {
    const std::string ckpt_path = workdir_file(cfg, "model.ckpt");
    run.input(ckpt_path);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    predictions = predict_examples(ckpt, subset, vocab);
  } else if (model == "baseline") {
    const std::string model_path = workdir_file(cfg, "baseline.bin");
    run.input(model_path);
    TfidfModel tfidf = load_baseline(model_path);
    if (tfidf.vocab_digest != vocab_digest(vocab)) {
      throw VocabMismatch("baseline model was fitted against a different vocabulary");
    }
    for (const Example& e : subset) {
      predictions.emplace_back(e.patient_id + "/" + e.anchor_admission_id,
                               baseline_score(tfidf, collect_tokens(e.history, vocab)));
    }
  } else {
    throw ConfigInvalid("unknown model: " + model + " (expected lstm|baseline)");
  }

  const std::string out_path = workdir_file(cfg, "predictions_" + model + "_" + split + ".tsv");
  {
    std::ofstream out(out_path, std::ios::trunc);
    char buf[64];
    for (const auto& [id, p] : predictions) {
      std::snprintf(buf, sizeof(buf), "%.17g", p);
      out << id << "\t" << buf << "\n";
    }
  }
  run.output(out_path);
  run.finish(json::object());
}

}  // namespace rdmt
