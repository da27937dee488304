#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rdmt/cohort.hpp"
#include "rdmt/hash.hpp"
#include "rdmt/metrics.hpp"
#include "rdmt/seqmodel.hpp"

namespace rdmt {

namespace {

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t k = 0) {
  return splitmix64(splitmix64(base ^ fnv1a64(tag)) ^ k);
}

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

WindowSequence prepare_windows(const Example& e, const Vocabulary& vocab,
                               const TrainConfig& cfg) {
  return windowize(encode_example(e, vocab), e.anchor_time, cfg.window_hours,
                   cfg.max_windows);
}

TrainResult train_model(const std::vector<Example>& train,
                        const std::vector<Example>& val, const Vocabulary& vocab,
                        const TrainConfig& cfg, std::ostream* log_stream) {
  if (train.empty()) throw std::invalid_argument("train_model: empty training set");
  if (val.empty()) throw std::invalid_argument("train_model: empty validation set");

  std::vector<Example> materialized;
  const std::vector<Example>* train_set = &train;
  if (cfg.oversample > 0.0) {
    materialized =
        oversample_positives(train, cfg.oversample, derive_seed(cfg.seed, "oversample"));
    train_set = &materialized;
  }

  TrainResult result;
  result.train_examples = train_set->size();
  std::size_t positives = 0;
  for (const Example& e : *train_set) positives += static_cast<std::size_t>(e.label);
  result.realized_train_positive_rate =
      static_cast<double>(positives) / static_cast<double>(train_set->size());

  std::vector<WindowSequence> train_windows;
  train_windows.reserve(train_set->size());
  std::vector<int> train_labels;
  for (const Example& e : *train_set) {
    train_windows.push_back(prepare_windows(e, vocab, cfg));
    train_labels.push_back(e.label);
  }
  std::vector<WindowSequence> val_windows;
  std::vector<int> val_labels;
  for (const Example& e : val) {
    val_windows.push_back(prepare_windows(e, vocab, cfg));
    val_labels.push_back(e.label);
  }

  ModelDims dims;
  dims.token_dim = cfg.token_dim;
  dims.pool_hidden = cfg.pool_hidden;
  dims.time_dim = cfg.time_dim;
  dims.lstm_hidden = cfg.lstm_hidden;
  dims.max_time_buckets = cfg.max_time_buckets;
  dims.n_features = vocab.feature_count();
  dims.n_tokens = vocab.token_count();

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.vocab_digest = vocab_digest(vocab);
  ckpt.params = init_params(dims, derive_seed(cfg.seed, "init"));

  auto params = ckpt.params.all_params();
  nd::AdamOptimizer optimizer(params, cfg.lr);

  std::vector<std::vector<double>> best_snapshot;
  double best_auroc = -1.0;
  int best_epoch = -1;

  std::vector<std::size_t> order(train_set->size());
  std::iota(order.begin(), order.end(), 0);

  nd::Tape tape;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double epoch_start = now_seconds();
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      optimizer.zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        tape.reset();
        ForwardOptions opts;
        opts.training = true;
        opts.emb_dropout = cfg.emb_dropout;
        opts.hidden_dropout = cfg.hidden_dropout;
        opts.dropout_seed =
            derive_seed(cfg.seed, "dropout",
                        (static_cast<std::uint64_t>(epoch) << 32) ^ idx);
        nd::Tape::Id p = build_forward(tape, train_windows[idx], ckpt.params, opts);
        nd::Tape::Id loss = tape.bce(p, train_labels[idx]);
        const double loss_value = tape.scalar_value(loss);
        if (!std::isfinite(loss_value)) {
          throw Diverged("non-finite loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch_index));
        }
        loss_sum += loss_value;
        tape.backward(loss);
      }
      optimizer.step(1.0 / static_cast<double>(end - begin));
      ++batch_index;
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());

    std::vector<double> val_scores;
    val_scores.reserve(val_windows.size());
    for (const WindowSequence& w : val_windows) {
      val_scores.push_back(predict_prob(w, ckpt.params));
    }
    const double val_auroc = auroc(val_scores, val_labels);

    if (val_auroc > best_auroc) {
      best_auroc = val_auroc;
      best_epoch = epoch;
      best_snapshot.clear();
      for (nd::Tensor* t : params) best_snapshot.push_back(t->data);
    }

    EpochLog log{epoch, train_loss, val_auroc, now_seconds() - epoch_start};
    result.log.push_back(log);
    if (log_stream) {
      (*log_stream) << "epoch=" << epoch << " train_loss=" << train_loss
                    << " val_auroc=" << val_auroc << " wall_seconds=" << log.wall_seconds
                    << "\n";
      log_stream->flush();
    }
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->data = best_snapshot[i];
  ckpt.best_epoch = best_epoch;
  ckpt.best_val_auroc = best_auroc;
  result.checkpoint = std::move(ckpt);
  return result;
}

std::vector<std::pair<std::string, double>> predict_examples(
    Checkpoint& ckpt, const std::vector<Example>& examples, const Vocabulary& vocab) {
  const std::string digest = vocab_digest(vocab);
  if (digest != ckpt.vocab_digest) {
    throw VocabMismatch("checkpoint vocabulary digest " + ckpt.vocab_digest +
                        " does not match " + digest);
  }
  std::vector<std::pair<std::string, double>> out;
  out.reserve(examples.size());
  for (const Example& e : examples) {
    WindowSequence w = prepare_windows(e, vocab, ckpt.config);
    out.emplace_back(e.patient_id + "/" + e.anchor_admission_id,
                     predict_prob(w, ckpt.params));
  }
  return out;
}

}  // namespace rdmt
