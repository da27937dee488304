#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rdmt/featurize.hpp"
#include "rdmt/seqmodel.hpp"
#include "rdmt/tensor.hpp"

namespace rdmt {

// How a token's corpus-level TF-IDF relevance is averaged: over all N
// documents (zero where absent) or only over documents containing it.
enum class TfidfAveraging { kAllDocs, kContainingDocs };

struct BaselineConfig {
  int top_k = 5000;
  int epochs = 8;
  int batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  TfidfAveraging averaging = TfidfAveraging::kAllDocs;
};

struct TfidfStats {
  std::map<TokenId, double> score;  // corpus relevance per token
  std::map<TokenId, double> idf;
  std::size_t n_docs = 0;
};

// BOW TF-IDF + logistic regression over the same encoded-token stream the
// sequence model consumes (only windowing differs).
struct TfidfModel {
  std::vector<TokenId> selected_tokens;  // score desc, token-string tie-break
  std::vector<double> idf;               // aligned with selected_tokens
  nd::Tensor lr_w;                       // top_k x 1
  nd::Tensor lr_b;                       // 1 x 1
  std::map<TokenId, std::size_t> slot_of_token;
  BaselineConfig config;
  std::string vocab_digest;
  int best_epoch = -1;
  double best_val_auroc = 0.0;
};

// The encoded-token multiset of a list of events: payload tokens of
// in-vocabulary features plus all Form key/value tokens.
std::vector<TokenId> collect_tokens(const std::vector<EventRecord>& events,
                                    const Vocabulary& vocab);

// tf(t,d) = count/|d|; idf(t) = ln((1+N)/(1+df)) + 1. Throws EmptyCorpus on
// zero documents.
TfidfStats tfidf_stats(const std::vector<std::vector<TokenId>>& docs,
                       TfidfAveraging averaging = TfidfAveraging::kAllDocs);

// Token selection by score (desc, token-string lexicographic tie-break).
TfidfModel fit_tfidf(const TfidfStats& stats, const Vocabulary& vocab, int top_k);

// Dense tf-idf vector of a document against the selected tokens.
std::vector<double> vectorize(const std::vector<TokenId>& doc_tokens,
                              const TfidfModel& model);

double baseline_score(const TfidfModel& model, const std::vector<TokenId>& doc_tokens);

struct BaselineTrainResult {
  TfidfModel model;
  std::vector<EpochLog> log;
};

// TF-IDF fit on train patient timelines, then logistic regression on the
// train examples by BCE + Adam with per-epoch validation AUROC selection.
// Throws SingleClass unless both labels occur in train.
BaselineTrainResult train_baseline(const std::vector<PatientHistory>& train_histories,
                                   const std::vector<Example>& train,
                                   const std::vector<Example>& val,
                                   const Vocabulary& vocab, const BaselineConfig& cfg,
                                   std::ostream* log_stream = nullptr);

// "RDMT-BASE 1" + one-line JSON manifest (selected tokens, idf) + raw
// little-endian float64 weights.
void save_baseline(const TfidfModel& model, const std::string& path);
TfidfModel load_baseline(const std::string& path);

}  // namespace rdmt
