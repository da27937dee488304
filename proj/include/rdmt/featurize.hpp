#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmt/cohort.hpp"
#include "rdmt/records.hpp"

namespace rdmt {

using TokenId = std::int32_t;
using FeatureId = std::int32_t;

inline constexpr TokenId kPadToken = 0;
inline constexpr TokenId kOovToken = 1;

// Lowercases and splits on maximal runs of non-letter/non-digit characters.
// ASCII plus Latin-1 Supplement and Latin Extended-A letters are handled
// (accented letters are letters); anything else separates.
std::vector<std::string> tokenize_text(const std::string& s);

// "<entity>.<field>", lowercase. Payload fields are already dot-joined.
std::string feature_path(const EventRecord& r, const std::string& field);

struct EmptyCorpus : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Global token vocabulary (shared by all features and Form keys/values)
// plus the feature-path vocabulary. Built from the train split only.
struct Vocabulary {
  std::map<std::string, TokenId> token_to_id;      // includes <pad>, <oov>
  std::map<std::string, FeatureId> feature_to_id;  // dense [0, F)
  int min_token_count = 5;

  TokenId token_count() const { return static_cast<TokenId>(token_to_id.size()); }
  FeatureId feature_count() const { return static_cast<FeatureId>(feature_to_id.size()); }

  TokenId token_id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kOovToken : it->second;
  }
};

// Token ids by count desc then lexicographic; feature ids lexicographic over
// the max_features most frequent feature paths.
Vocabulary build_vocab(const std::vector<PatientHistory>& train_histories,
                       int min_token_count, int max_features);

void save_vocab(const Vocabulary& v, const std::string& path);
Vocabulary load_vocab(const std::string& path);
// Digest over the canonical vocab serialization; checkpoints pin this.
std::string vocab_digest(const Vocabulary& v);

struct FormDatum {
  std::vector<TokenId> key_ids;    // non-empty
  std::vector<TokenId> value_ids;  // non-empty
};

// Either one (feature_id, token_id) pair or one Form (K_list, V_list) pair.
struct EncodedDatum {
  Instant timestamp = 0;
  bool is_form = false;
  FeatureId feature_id = -1;  // flat only
  TokenId token_id = -1;      // flat only
  FormDatum form;             // form only
};

// Every payload token of every in-vocabulary feature becomes one flat datum;
// form pairs become form data. Unknown tokens map to <oov>; personal
// (timestampless) data is anchored at anchor_time. Output is time-ordered.
std::vector<EncodedDatum> encode_example(const Example& e, const Vocabulary& v);

struct Window {
  int bucket_index = 0;  // 0 = most recent
  std::map<FeatureId, std::vector<TokenId>> flat_data;
  std::vector<FormDatum> form_data;
};

// Non-empty 12-hour buckets ordered oldest to newest (bucket indices
// strictly decreasing; newest last).
struct WindowSequence {
  std::vector<Window> windows;
};

struct FutureEvent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Buckets by age: a datum of age d lands in bucket floor(d / window).
// Empty buckets are omitted; if more than max_windows buckets are non-empty
// the newest max_windows are kept. Throws FutureEvent on timestamp > anchor.
WindowSequence windowize(const std::vector<EncodedDatum>& data, Instant anchor,
                         int window_hours = 12, int max_windows = 256);

inline int time_bucket_embedding_index(int bucket_index, int max_time_buckets) {
  return bucket_index < max_time_buckets ? bucket_index : max_time_buckets - 1;
}

}  // namespace rdmt
