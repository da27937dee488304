#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmt/config.hpp"

namespace rdmt {

struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DigestMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One workdir, one run at a time.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::string& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::string path_;
};

// Resolved artifact locations inside (or configured outside) the workdir.
std::string events_artifact(const RunConfig& cfg);
std::string admissions_artifact(const RunConfig& cfg);
std::string workdir_file(const RunConfig& cfg, const std::string& name);

// Resolved-config echo; every stage writes it before running.
void write_config_echo(const RunConfig& cfg);

// Examples file: one object per line with the event slice inlined.
void write_examples_file(const std::string& path, const std::vector<Example>& examples);
std::vector<Example> read_examples_file(const std::string& path);

// Split manifest: "patient_id<TAB>split" lines.
void write_split_file(const std::string& path, const SplitAssignment& split);
std::map<std::string, Split> read_split_file(const std::string& path);

// Pipeline stages. Each validates the digests of its inputs against the
// producing stage's manifest, writes versioned outputs, and records a stage
// manifest (input/output digests, config subset, duration).
void stage_synth(const RunConfig& cfg);
void stage_cohort(const RunConfig& cfg);
void stage_vocab(const RunConfig& cfg);
void stage_train(const RunConfig& cfg);
void stage_train_baseline(const RunConfig& cfg);
void stage_eval(const RunConfig& cfg, const std::string& model, const std::string& split);
void stage_predict(const RunConfig& cfg, const std::string& model, const std::string& split);

}  // namespace rdmt
