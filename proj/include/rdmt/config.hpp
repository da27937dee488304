#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdmt/baseline.hpp"
#include "rdmt/cohort.hpp"
#include "rdmt/seqmodel.hpp"
#include "rdmt/synth.hpp"

namespace rdmt {

struct ConfigInvalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat dotted-key run configuration. Every field has a default; a config
// file sets keys, command-line flags override them (flag wins). The resolved
// key set is echoed into the workdir before any stage runs.
struct RunConfig {
  std::string events_path;      // paths.events
  std::string admissions_path;  // paths.admissions
  std::string workdir = "work"; // paths.workdir

  std::uint64_t master_seed = 1;  // seed

  int cohort_horizon_days = 30;           // cohort.horizon_days
  int cohort_prereg_window_hours = 24;    // cohort.prereg_window_hours
  std::string cohort_anchor = "admission";  // cohort.anchor: admission|discharge

  std::uint64_t split_seed = 0;  // split.seed (0 = derive from master seed)
  double split_train = 0.8;      // split.train
  double split_validation = 0.1; // split.validation
  double split_test = 0.1;       // split.test

  int featurize_min_token_count = 5;    // featurize.min_token_count
  int featurize_max_features = 64;      // featurize.max_features
  int featurize_window_hours = 12;      // featurize.window_hours
  int featurize_max_windows = 256;      // featurize.max_windows
  int featurize_max_time_buckets = 512; // featurize.max_time_buckets

  int model_token_dim = 32;        // model.token_dim
  int model_pool_hidden = 32;      // model.pool_hidden
  int model_time_dim = 8;          // model.time_dim
  int model_lstm_hidden = 128;     // model.lstm_hidden
  double model_lr = 1e-3;          // model.lr
  int model_batch_size = 32;       // model.batch_size
  int model_epochs = 6;            // model.epochs
  double model_emb_dropout = 0.1;  // model.emb_dropout
  double model_hidden_dropout = 0.2;  // model.hidden_dropout
  double model_oversample = 0.0;   // model.oversample: off | target rate

  int baseline_top_k = 5000;       // baseline.top_k
  int baseline_epochs = 8;         // baseline.epochs
  int baseline_batch_size = 32;    // baseline.batch_size
  double baseline_lr = 1e-3;       // baseline.lr
  std::string baseline_averaging = "all";  // baseline.averaging: all|containing

  double eval_threshold = 0.5;     // eval.threshold

  int synth_n_patients = 1000;           // synth.n_patients
  int synth_events_min = 10;             // synth.events_min
  int synth_events_max = 40;             // synth.events_max
  int synth_token_pool = 200;            // synth.token_pool
  double synth_positive_rate = 0.0618;   // synth.positive_rate
  std::string synth_signal = "none";     // synth.signal: none|token|temporal
  double synth_q = 0.9;                  // synth.q
  int synth_span_days = 730;             // synth.span_days
  double synth_second_cluster_prob = 0.25;  // synth.second_cluster_prob

  // Applies one "key = value" assignment; throws ConfigInvalid for unknown
  // keys or unparseable values.
  void set(const std::string& key, const std::string& value);

  // All keys with resolved values, sorted by key.
  std::vector<std::pair<std::string, std::string>> items() const;

  // Derived views.
  CohortConfig cohort_config() const;
  SplitRatios split_ratios() const;
  std::uint64_t effective_split_seed() const;
  TrainConfig train_config() const;
  BaselineConfig baseline_config() const;
  SynthConfig synth_config() const;
};

// Reads "key = value" lines ('#' comments, blank lines allowed).
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Applies --key value / --key=value pairs on top.
void apply_flags(RunConfig& cfg, const std::vector<std::string>& args);

}  // namespace rdmt
