#include "rdmt/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rdmt/hash.hpp"

namespace rdmt {

namespace {

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t end = 0;
    int v = std::stoi(value, &end);
    if (end != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("config key " + key + ": expected integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t end = 0;
    double v = std::stod(value, &end);
    if (end != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("config key " + key + ": expected number, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t end = 0;
    std::uint64_t v = std::stoull(value, &end);
    if (end != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("config key " + key + ": expected unsigned integer, got '" +
                        value + "'");
  }
}

std::string format_double(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "paths.events") events_path = value;
  else if (key == "paths.admissions") admissions_path = value;
  else if (key == "paths.workdir") workdir = value;
  else if (key == "seed") master_seed = parse_u64(key, value);
  else if (key == "cohort.horizon_days") cohort_horizon_days = parse_int(key, value);
  else if (key == "cohort.prereg_window_hours") cohort_prereg_window_hours = parse_int(key, value);
  else if (key == "cohort.anchor") {
    if (value != "admission" && value != "discharge") {
      throw ConfigInvalid("config key cohort.anchor: expected admission|discharge, got '" +
                          value + "'");
    }
    cohort_anchor = value;
  } else if (key == "split.seed") split_seed = parse_u64(key, value);
  else if (key == "split.train") split_train = parse_double(key, value);
  else if (key == "split.validation") split_validation = parse_double(key, value);
  else if (key == "split.test") split_test = parse_double(key, value);
  else if (key == "featurize.min_token_count") featurize_min_token_count = parse_int(key, value);
  else if (key == "featurize.max_features") featurize_max_features = parse_int(key, value);
  else if (key == "featurize.window_hours") featurize_window_hours = parse_int(key, value);
  else if (key == "featurize.max_windows") featurize_max_windows = parse_int(key, value);
  else if (key == "featurize.max_time_buckets") featurize_max_time_buckets = parse_int(key, value);
  else if (key == "model.token_dim") model_token_dim = parse_int(key, value);
  else if (key == "model.pool_hidden") model_pool_hidden = parse_int(key, value);
  else if (key == "model.time_dim") model_time_dim = parse_int(key, value);
  else if (key == "model.lstm_hidden") model_lstm_hidden = parse_int(key, value);
  else if (key == "model.lr") model_lr = parse_double(key, value);
  else if (key == "model.batch_size") model_batch_size = parse_int(key, value);
  else if (key == "model.epochs") model_epochs = parse_int(key, value);
  else if (key == "model.emb_dropout") model_emb_dropout = parse_double(key, value);
  else if (key == "model.hidden_dropout") model_hidden_dropout = parse_double(key, value);
  else if (key == "model.oversample") {
    model_oversample = value == "off" ? 0.0 : parse_double(key, value);
  } else if (key == "baseline.top_k") baseline_top_k = parse_int(key, value);
  else if (key == "baseline.epochs") baseline_epochs = parse_int(key, value);
  else if (key == "baseline.batch_size") baseline_batch_size = parse_int(key, value);
  else if (key == "baseline.lr") baseline_lr = parse_double(key, value);
  else if (key == "baseline.averaging") {
    if (value != "all" && value != "containing") {
      throw ConfigInvalid("config key baseline.averaging: expected all|containing, got '" +
                          value + "'");
    }
    baseline_averaging = value;
  } else if (key == "eval.threshold") eval_threshold = parse_double(key, value);
  else if (key == "synth.n_patients") synth_n_patients = parse_int(key, value);
  else if (key == "synth.events_min") synth_events_min = parse_int(key, value);
  else if (key == "synth.events_max") synth_events_max = parse_int(key, value);
  else if (key == "synth.token_pool") synth_token_pool = parse_int(key, value);
  else if (key == "synth.positive_rate") synth_positive_rate = parse_double(key, value);
  else if (key == "synth.signal") {
    signal_kind_from_name(value);  // validates
    synth_signal = value;
  } else if (key == "synth.q") synth_q = parse_double(key, value);
  else if (key == "synth.span_days") synth_span_days = parse_int(key, value);
  else if (key == "synth.second_cluster_prob") synth_second_cluster_prob = parse_double(key, value);
  else throw ConfigInvalid("unknown config key: " + key);
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"baseline.averaging", baseline_averaging},
      {"baseline.batch_size", std::to_string(baseline_batch_size)},
      {"baseline.epochs", std::to_string(baseline_epochs)},
      {"baseline.lr", format_double(baseline_lr)},
      {"baseline.top_k", std::to_string(baseline_top_k)},
      {"cohort.anchor", cohort_anchor},
      {"cohort.horizon_days", std::to_string(cohort_horizon_days)},
      {"cohort.prereg_window_hours", std::to_string(cohort_prereg_window_hours)},
      {"eval.threshold", format_double(eval_threshold)},
      {"featurize.max_features", std::to_string(featurize_max_features)},
      {"featurize.max_time_buckets", std::to_string(featurize_max_time_buckets)},
      {"featurize.max_windows", std::to_string(featurize_max_windows)},
      {"featurize.min_token_count", std::to_string(featurize_min_token_count)},
      {"featurize.window_hours", std::to_string(featurize_window_hours)},
      {"model.batch_size", std::to_string(model_batch_size)},
      {"model.emb_dropout", format_double(model_emb_dropout)},
      {"model.epochs", std::to_string(model_epochs)},
      {"model.hidden_dropout", format_double(model_hidden_dropout)},
      {"model.lr", format_double(model_lr)},
      {"model.lstm_hidden", std::to_string(model_lstm_hidden)},
      {"model.oversample", model_oversample == 0.0 ? "off" : format_double(model_oversample)},
      {"model.pool_hidden", std::to_string(model_pool_hidden)},
      {"model.time_dim", std::to_string(model_time_dim)},
      {"model.token_dim", std::to_string(model_token_dim)},
      {"paths.admissions", admissions_path},
      {"paths.events", events_path},
      {"paths.workdir", workdir},
      {"seed", std::to_string(master_seed)},
      {"split.seed", std::to_string(split_seed)},
      {"split.test", format_double(split_test)},
      {"split.train", format_double(split_train)},
      {"split.validation", format_double(split_validation)},
      {"synth.events_max", std::to_string(synth_events_max)},
      {"synth.events_min", std::to_string(synth_events_min)},
      {"synth.n_patients", std::to_string(synth_n_patients)},
      {"synth.positive_rate", format_double(synth_positive_rate)},
      {"synth.q", format_double(synth_q)},
      {"synth.second_cluster_prob", format_double(synth_second_cluster_prob)},
      {"synth.signal", synth_signal},
      {"synth.span_days", std::to_string(synth_span_days)},
      {"synth.token_pool", std::to_string(synth_token_pool)},
  };
  return out;
}

CohortConfig RunConfig::cohort_config() const {
  CohortConfig c;
  c.horizon_days = cohort_horizon_days;
  c.prereg_window_hours = cohort_prereg_window_hours;
  c.anchor = cohort_anchor == "discharge" ? AnchorPoint::kDischarge : AnchorPoint::kAdmission;
  return c;
}

SplitRatios RunConfig::split_ratios() const {
  const double total = split_train + split_validation + split_test;
  if (total < 0.999 || total > 1.001) {
    throw ConfigInvalid("split ratios must sum to 1, got " + format_double(total));
  }
  return {split_train, split_validation, split_test};
}

std::uint64_t RunConfig::effective_split_seed() const {
  return split_seed != 0 ? split_seed : splitmix64(master_seed ^ fnv1a64("split"));
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = model_epochs;
  t.batch_size = model_batch_size;
  t.lr = model_lr;
  t.emb_dropout = model_emb_dropout;
  t.hidden_dropout = model_hidden_dropout;
  t.oversample = model_oversample;
  t.seed = splitmix64(master_seed ^ fnv1a64("train"));
  t.token_dim = model_token_dim;
  t.pool_hidden = model_pool_hidden;
  t.time_dim = model_time_dim;
  t.lstm_hidden = model_lstm_hidden;
  t.window_hours = featurize_window_hours;
  t.max_windows = featurize_max_windows;
  t.max_time_buckets = featurize_max_time_buckets;
  return t;
}

BaselineConfig RunConfig::baseline_config() const {
  BaselineConfig b;
  b.top_k = baseline_top_k;
  b.epochs = baseline_epochs;
  b.batch_size = baseline_batch_size;
  b.lr = baseline_lr;
  b.seed = splitmix64(master_seed ^ fnv1a64("baseline"));
  b.averaging = baseline_averaging == "containing" ? TfidfAveraging::kContainingDocs
                                                   : TfidfAveraging::kAllDocs;
  return b;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s;
  s.n_patients = synth_n_patients;
  s.events_per_patient_min = synth_events_min;
  s.events_per_patient_max = synth_events_max;
  s.token_pool = synth_token_pool;
  s.target_positive_rate = synth_positive_rate;
  s.signal = signal_kind_from_name(synth_signal);
  s.signal_q = synth_q;
  s.seed = splitmix64(master_seed ^ fnv1a64("synth"));
  s.span_days = synth_span_days;
  s.second_cluster_prob = synth_second_cluster_prob;
  return s;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigInvalid(path + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
    }
    base.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

void apply_flags(RunConfig& cfg, const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0) {
      throw ConfigInvalid("expected --key value, got '" + a + "'");
    }
    std::string key = a.substr(2);
    std::string value;
    std::size_t eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= args.size()) throw ConfigInvalid("flag --" + key + " needs a value");
      value = args[++i];
    }
    cfg.set(key, value);
  }
}

}  // namespace rdmt
