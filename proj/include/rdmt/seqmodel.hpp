#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmt/adam.hpp"
#include "rdmt/featurize.hpp"
#include "rdmt/tape.hpp"
#include "rdmt/tensor.hpp"

namespace rdmt {

struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VocabMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Diverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelDims {
  int token_dim = 32;        // d
  int pool_hidden = 32;      // a
  int time_dim = 8;          // d_t
  int lstm_hidden = 128;     // H
  int max_time_buckets = 512;
  std::int32_t n_features = 0;  // F, from the vocabulary
  std::int32_t n_tokens = 0;    // |V|

  // Window vector length: F pooled features, the pooled Forms block, and
  // the relative-time embedding.
  std::int64_t input_dim() const {
    return static_cast<std::int64_t>(n_features) * token_dim + 2 * token_dim + time_dim;
  }
};

// One weighting network: in -> a (tanh) -> 1 (sigmoid).
struct PoolNet {
  nd::Tensor w1;  // in x a
  nd::Tensor b1;  // 1 x a
  nd::Tensor w2;  // a x 1
  nd::Tensor b2;  // 1 x 1
};

// All trainable tensors of the sequence model.
struct ModelParams {
  ModelDims dims;
  nd::Tensor token_emb;                // V x d
  std::vector<PoolNet> feature_nets;   // one per feature, d -> a -> 1
  PoolNet form_net;                    // 2d -> a -> 1
  nd::Tensor time_emb;                 // max_time_buckets x d_t
  nd::Tensor lstm_wx[4];               // D x H, gate order i,f,o,g
  nd::Tensor lstm_wh[4];               // H x H
  nd::Tensor lstm_b[4];                // 1 x H
  nd::Tensor head_w;                   // H x 1
  nd::Tensor head_b;                   // 1 x 1

  // Stable order; defines the checkpoint tensor directory.
  std::vector<std::pair<std::string, nd::Tensor*>> named_params();
  std::vector<nd::Tensor*> all_params();
};

// Embeddings U(-0.05, 0.05), dense and LSTM matrices Xavier-uniform, zero
// biases, forget-gate bias +1.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  double emb_dropout = 0.1;
  double hidden_dropout = 0.2;
};

// Weighted-average pooling of token embeddings (rows of embs) with weights
// sigma(net(e_i)); output 1 x d, normalized by (sum w + 1e-8).
nd::Tape::Id pool_feature(nd::Tape& tape, nd::Tape::Id embs, PoolNet& net);

// Form pooling: per pair, k and v are means of key/value token embeddings;
// the [k;v] rows are pooled with weights sigma(form_net([k;v])). Output 1 x 2d.
nd::Tape::Id pool_forms(nd::Tape& tape, std::span<const FormDatum> pairs,
                        ModelParams& params, const ForwardOptions& opts,
                        std::uint64_t* dropout_counter);

// Fixed feature-id-order concatenation of pooled blocks (zero block for a
// feature absent from the window), pooled Forms block, and the
// relative-time embedding.
nd::Tape::Id build_window_vector(nd::Tape& tape, const Window& w, ModelParams& params,
                                 const ForwardOptions& opts,
                                 std::uint64_t* dropout_counter);

// Whole-model forward: LSTM over window vectors oldest to newest from zero
// state, logistic head on the (dropout-masked) last hidden state. Returns
// the probability node. A history that encodes to zero windows runs one
// synthetic all-zero window with bucket 0.
nd::Tape::Id build_forward(nd::Tape& tape, const WindowSequence& seq,
                           ModelParams& params, const ForwardOptions& opts);

// Inference-mode probability.
double predict_prob(const WindowSequence& seq, ModelParams& params);

struct TrainConfig {
  int epochs = 6;
  int batch_size = 32;
  double lr = 1e-3;
  double emb_dropout = 0.1;
  double hidden_dropout = 0.2;
  double oversample = 0.0;  // 0 = off; otherwise the target positive rate
  std::uint64_t seed = 0;

  int token_dim = 32;
  int pool_hidden = 32;
  int time_dim = 8;
  int lstm_hidden = 128;

  int window_hours = 12;
  int max_windows = 256;
  int max_time_buckets = 512;
};

struct Checkpoint {
  int format_version = 1;
  TrainConfig config;
  std::string vocab_digest;
  ModelParams params;
  int best_epoch = -1;          // 1-based
  double best_val_auroc = 0.0;
};

// "RDMT-CKPT 1" + one-line JSON manifest + raw little-endian float64 arrays
// in manifest order. Writes are atomic (temp file + rename).
void save_checkpoint(Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auroc = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  double realized_train_positive_rate = 0.0;
  std::size_t train_examples = 0;
};

// Full training protocol: optional positive oversampling, per-epoch seeded
// shuffle, minibatch BCE + Adam, per-epoch validation AUROC, best-epoch
// parameter selection. Deterministic given cfg.seed. Throws Diverged on a
// non-finite loss.
TrainResult train_model(const std::vector<Example>& train,
                        const std::vector<Example>& val, const Vocabulary& vocab,
                        const TrainConfig& cfg, std::ostream* log_stream = nullptr);

// Inference over encoded examples; id is "<patient_id>/<anchor_admission_id>".
// Throws VocabMismatch if the checkpoint was trained against a different
// vocabulary.
std::vector<std::pair<std::string, double>> predict_examples(
    Checkpoint& ckpt, const std::vector<Example>& examples, const Vocabulary& vocab);

// Shared by trainer and predictor: encode + windowize one example under the
// checkpointed featurization settings.
WindowSequence prepare_windows(const Example& e, const Vocabulary& vocab,
                               const TrainConfig& cfg);

}  // namespace rdmt
