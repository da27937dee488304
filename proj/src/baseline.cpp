#include "rdmt/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "rdmt/hash.hpp"
#include "rdmt/kernels.hpp"
#include "rdmt/metrics.hpp"

namespace rdmt {

using nlohmann::json;

std::vector<TokenId> collect_tokens(const std::vector<EventRecord>& events,
                                    const Vocabulary& vocab) {
  std::vector<TokenId> out;
  for (const auto& r : events) {
    if (r.entity == Entity::kForm) {
      for (const auto& [k, v] : r.form_pairs) {
        for (auto& t : tokenize_text(k)) out.push_back(vocab.token_id(t));
        for (auto& t : tokenize_text(v)) out.push_back(vocab.token_id(t));
      }
    } else {
      for (const auto& [field, value] : r.payload) {
        if (!vocab.feature_to_id.contains(feature_path(r, field))) continue;
        for (auto& t : tokenize_text(value)) out.push_back(vocab.token_id(t));
      }
    }
  }
  return out;
}

TfidfStats tfidf_stats(const std::vector<std::vector<TokenId>>& docs,
                       TfidfAveraging averaging) {
  if (docs.empty()) throw EmptyCorpus("tfidf_stats: no documents");
  const double n_docs = static_cast<double>(docs.size());

  std::map<TokenId, double> tf_sum;  // sum over docs of tf(t,d)
  std::map<TokenId, std::int64_t> df;
  std::map<TokenId, std::int64_t> per_doc;
  for (const auto& doc : docs) {
    if (doc.empty()) continue;
    per_doc.clear();
    for (TokenId t : doc) ++per_doc[t];
    const double inv_len = 1.0 / static_cast<double>(doc.size());
    for (const auto& [t, count] : per_doc) {
      tf_sum[t] += static_cast<double>(count) * inv_len;
      ++df[t];
    }
  }

  TfidfStats stats;
  stats.n_docs = docs.size();
  for (const auto& [t, sum] : tf_sum) {
    const double idf =
        std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[t]))) + 1.0;
    stats.idf[t] = idf;
    const double denominator = averaging == TfidfAveraging::kAllDocs
                                   ? n_docs
                                   : static_cast<double>(df[t]);
    stats.score[t] = sum * idf / denominator;
  }
  return stats;
}

TfidfModel fit_tfidf(const TfidfStats& stats, const Vocabulary& vocab, int top_k) {
  std::vector<const std::string*> token_names(vocab.token_to_id.size());
  for (const auto& [name, id] : vocab.token_to_id) {
    token_names[static_cast<std::size_t>(id)] = &name;
  }

  std::vector<TokenId> candidates;
  candidates.reserve(stats.score.size());
  for (const auto& [t, score] : stats.score) candidates.push_back(t);
  std::sort(candidates.begin(), candidates.end(), [&](TokenId a, TokenId b) {
    const double sa = stats.score.at(a), sb = stats.score.at(b);
    if (sa != sb) return sa > sb;
    return *token_names[static_cast<std::size_t>(a)] <
           *token_names[static_cast<std::size_t>(b)];
  });
  if (static_cast<int>(candidates.size()) > top_k) candidates.resize(top_k);

  TfidfModel model;
  model.selected_tokens = std::move(candidates);
  model.idf.reserve(model.selected_tokens.size());
  for (std::size_t i = 0; i < model.selected_tokens.size(); ++i) {
    model.idf.push_back(stats.idf.at(model.selected_tokens[i]));
    model.slot_of_token[model.selected_tokens[i]] = i;
  }
  model.lr_w.resize({static_cast<std::int64_t>(model.selected_tokens.size()), 1}, true);
  model.lr_b.resize({1, 1}, true);
  model.vocab_digest = vocab_digest(vocab);
  return model;
}

std::vector<double> vectorize(const std::vector<TokenId>& doc_tokens,
                              const TfidfModel& model) {
  std::vector<double> out(model.selected_tokens.size(), 0.0);
  if (doc_tokens.empty()) return out;
  const double inv_len = 1.0 / static_cast<double>(doc_tokens.size());
  for (TokenId t : doc_tokens) {
    auto it = model.slot_of_token.find(t);
    if (it == model.slot_of_token.end()) continue;
    out[it->second] += inv_len * model.idf[it->second];
  }
  return out;
}

namespace {

double score_vector(const TfidfModel& model, const std::vector<double>& x) {
  const double z =
      kern::dot(x.data(), model.lr_w.data.data(), x.size()) + model.lr_b.data[0];
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t k = 0) {
  return splitmix64(splitmix64(base ^ fnv1a64(tag)) ^ k);
}

}  // namespace

double baseline_score(const TfidfModel& model, const std::vector<TokenId>& doc_tokens) {
  return score_vector(model, vectorize(doc_tokens, model));
}

BaselineTrainResult train_baseline(const std::vector<PatientHistory>& train_histories,
                                   const std::vector<Example>& train,
                                   const std::vector<Example>& val,
                                   const Vocabulary& vocab, const BaselineConfig& cfg,
                                   std::ostream* log_stream) {
  bool has_pos = false, has_neg = false;
  for (const Example& e : train) (e.label ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw SingleClass("train_baseline: training set must contain both classes");
  }

  std::vector<std::vector<TokenId>> docs;
  docs.reserve(train_histories.size());
  for (const auto& h : train_histories) docs.push_back(collect_tokens(h.events, vocab));

  BaselineTrainResult result;
  result.model = fit_tfidf(tfidf_stats(docs, cfg.averaging), vocab, cfg.top_k);
  result.model.config = cfg;
  TfidfModel& model = result.model;

  std::vector<std::vector<double>> train_x;
  train_x.reserve(train.size());
  std::vector<double> train_y;
  for (const Example& e : train) {
    train_x.push_back(vectorize(collect_tokens(e.history, vocab), model));
    train_y.push_back(e.label);
  }
  std::vector<std::vector<double>> val_x;
  std::vector<int> val_labels;
  for (const Example& e : val) {
    val_x.push_back(vectorize(collect_tokens(e.history, vocab), model));
    val_labels.push_back(e.label);
  }

  nd::AdamState w_state, b_state;
  w_state.init(model.lr_w);
  b_state.init(model.lr_b);
  w_state.lr = b_state.lr = cfg.lr;
  const std::size_t dim = model.selected_tokens.size();
  std::vector<double> grad_w(dim), grad_b(1);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::vector<double>> best_params;
  double best_auroc = -1.0;
  int best_epoch = -1;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      grad_b[0] = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        const std::vector<double>& x = train_x[idx];
        const double y = train_y[idx];
        const double p = score_vector(model, x);
        const double pc = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
        loss_sum += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
        // dL/dz = p - y for sigmoid + BCE.
        kern::axpy(grad_w.data(), p - y, x.data(), dim);
        grad_b[0] += p - y;
      }
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      kern::scale(grad_w.data(), inv_batch, dim);
      grad_b[0] *= inv_batch;
      nd::adam_step(model.lr_w, grad_w, w_state);
      nd::adam_step(model.lr_b, grad_b, b_state);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());

    std::vector<double> val_scores;
    val_scores.reserve(val_x.size());
    for (const auto& x : val_x) val_scores.push_back(score_vector(model, x));
    const double val_auroc = auroc(val_scores, val_labels);

    if (val_auroc > best_auroc) {
      best_auroc = val_auroc;
      best_epoch = epoch;
      best_params = {model.lr_w.data, model.lr_b.data};
    }
    result.log.push_back({epoch, train_loss, val_auroc, 0.0});
    if (log_stream) {
      (*log_stream) << "epoch=" << epoch << " train_loss=" << train_loss
                    << " val_auroc=" << val_auroc << "\n";
      log_stream->flush();
    }
  }

  model.lr_w.data = best_params[0];
  model.lr_b.data = best_params[1];
  model.best_epoch = best_epoch;
  model.best_val_auroc = best_auroc;
  return result;
}

void save_baseline(const TfidfModel& model, const std::string& path) {
  json manifest;
  manifest["version"] = 1;
  manifest["top_k"] = model.config.top_k;
  manifest["epochs"] = model.config.epochs;
  manifest["batch_size"] = model.config.batch_size;
  manifest["lr"] = model.config.lr;
  manifest["seed"] = model.config.seed;
  manifest["averaging"] =
      model.config.averaging == TfidfAveraging::kAllDocs ? "all" : "containing";
  manifest["vocab_digest"] = model.vocab_digest;
  manifest["best_epoch"] = model.best_epoch;
  manifest["best_val_auroc"] = model.best_val_auroc;
  manifest["selected_tokens"] = model.selected_tokens;
  manifest["idf"] = model.idf;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write baseline model: " + tmp);
    out << "RDMT-BASE 1\n" << manifest.dump() << "\n";
    out.write(reinterpret_cast<const char*>(model.lr_w.data.data()),
              static_cast<std::streamsize>(model.lr_w.data.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(model.lr_b.data.data()),
              static_cast<std::streamsize>(sizeof(double)));
    if (!out) throw std::runtime_error("short write on baseline model: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move baseline model into place: " + path);
  }
}

TfidfModel load_baseline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read baseline model: " + path);
  std::string magic, manifest_line;
  if (!std::getline(in, magic) || magic != "RDMT-BASE 1") {
    throw std::runtime_error("bad baseline magic in " + path);
  }
  if (!std::getline(in, manifest_line)) {
    throw std::runtime_error("missing baseline manifest in " + path);
  }
  json manifest = json::parse(manifest_line);

  TfidfModel model;
  model.config.top_k = manifest.at("top_k").get<int>();
  model.config.epochs = manifest.at("epochs").get<int>();
  model.config.batch_size = manifest.at("batch_size").get<int>();
  model.config.lr = manifest.at("lr").get<double>();
  model.config.seed = manifest.at("seed").get<std::uint64_t>();
  model.config.averaging = manifest.at("averaging").get<std::string>() == "all"
                               ? TfidfAveraging::kAllDocs
                               : TfidfAveraging::kContainingDocs;
  model.vocab_digest = manifest.at("vocab_digest").get<std::string>();
  model.best_epoch = manifest.at("best_epoch").get<int>();
  model.best_val_auroc = manifest.at("best_val_auroc").get<double>();
  model.selected_tokens = manifest.at("selected_tokens").get<std::vector<TokenId>>();
  model.idf = manifest.at("idf").get<std::vector<double>>();
  for (std::size_t i = 0; i < model.selected_tokens.size(); ++i) {
    model.slot_of_token[model.selected_tokens[i]] = i;
  }

  model.lr_w.resize({static_cast<std::int64_t>(model.selected_tokens.size()), 1}, true);
  model.lr_b.resize({1, 1}, true);
  in.read(reinterpret_cast<char*>(model.lr_w.data.data()),
          static_cast<std::streamsize>(model.lr_w.data.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(model.lr_b.data.data()),
          static_cast<std::streamsize>(sizeof(double)));
  if (!in) throw std::runtime_error("truncated baseline model: " + path);
  return model;
}

}  // namespace rdmt
