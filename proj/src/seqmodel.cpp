#include "rdmt/seqmodel.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rdmt/hash.hpp"

namespace rdmt {

using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nlohmann::json;

namespace {

constexpr double kPoolEps = 1e-8;
constexpr const char* kGateNames[4] = {"i", "f", "o", "g"};

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t.data) v = rng.next_range(lo, hi);
}

void fill_xavier(Tensor& t, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(t.shape.rows + t.shape.cols));
  fill_uniform(t, rng, -limit, limit);
}

PoolNet make_pool_net(std::int64_t in_dim, int hidden, Rng& rng) {
  PoolNet net;
  net.w1.resize({in_dim, hidden}, true);
  net.b1.resize({1, hidden}, true);
  net.w2.resize({hidden, 1}, true);
  net.b2.resize({1, 1}, true);
  fill_xavier(net.w1, rng);
  fill_xavier(net.w2, rng);
  return net;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("token_emb", &token_emb);
  for (std::size_t f = 0; f < feature_nets.size(); ++f) {
    std::string base = "feature_net." + std::to_string(f);
    out.emplace_back(base + ".w1", &feature_nets[f].w1);
    out.emplace_back(base + ".b1", &feature_nets[f].b1);
    out.emplace_back(base + ".w2", &feature_nets[f].w2);
    out.emplace_back(base + ".b2", &feature_nets[f].b2);
  }
  out.emplace_back("form_net.w1", &form_net.w1);
  out.emplace_back("form_net.b1", &form_net.b1);
  out.emplace_back("form_net.w2", &form_net.w2);
  out.emplace_back("form_net.b2", &form_net.b2);
  out.emplace_back("time_emb", &time_emb);
  for (int g = 0; g < 4; ++g) {
    out.emplace_back(std::string("lstm.wx.") + kGateNames[g], &lstm_wx[g]);
    out.emplace_back(std::string("lstm.wh.") + kGateNames[g], &lstm_wh[g]);
    out.emplace_back(std::string("lstm.b.") + kGateNames[g], &lstm_b[g]);
  }
  out.emplace_back("head.w", &head_w);
  out.emplace_back("head.b", &head_b);
  return out;
}

std::vector<Tensor*> ModelParams::all_params() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.dims = dims;

  p.token_emb.resize({dims.n_tokens, dims.token_dim}, true);
  fill_uniform(p.token_emb, rng, -0.05, 0.05);

  p.feature_nets.reserve(static_cast<std::size_t>(dims.n_features));
  for (std::int32_t f = 0; f < dims.n_features; ++f) {
    p.feature_nets.push_back(make_pool_net(dims.token_dim, dims.pool_hidden, rng));
  }
  p.form_net = make_pool_net(2 * dims.token_dim, dims.pool_hidden, rng);

  p.time_emb.resize({dims.max_time_buckets, dims.time_dim}, true);
  fill_uniform(p.time_emb, rng, -0.05, 0.05);

  const std::int64_t D = dims.input_dim();
  for (int g = 0; g < 4; ++g) {
    p.lstm_wx[g].resize({D, dims.lstm_hidden}, true);
    p.lstm_wh[g].resize({dims.lstm_hidden, dims.lstm_hidden}, true);
    p.lstm_b[g].resize({1, dims.lstm_hidden}, true);
    fill_xavier(p.lstm_wx[g], rng);
    fill_xavier(p.lstm_wh[g], rng);
  }
  // Forget gate starts open.
  for (double& v : p.lstm_b[1].data) v = 1.0;

  p.head_w.resize({dims.lstm_hidden, 1}, true);
  p.head_b.resize({1, 1}, true);
  fill_xavier(p.head_w, rng);
  return p;
}

namespace {

// Weighting-net scores for the rows of x: sigma(tanh(x w1 + b1) w2 + b2).
Tape::Id pool_scores(Tape& tape, Tape::Id x, PoolNet& net) {
  Tape::Id hidden = tape.tanh(
      tape.add_bias_rows(tape.matmul(x, tape.leaf(&net.w1)), tape.leaf(&net.b1)));
  return tape.sigmoid(
      tape.add_bias_rows(tape.matmul(hidden, tape.leaf(&net.w2)), tape.leaf(&net.b2)));
}

// Normalized weighted average of the rows of x: (s^T x) / (sum s + eps).
Tape::Id weighted_row_average(Tape& tape, Tape::Id x, Tape::Id scores) {
  Tape::Id numerator = tape.matmul(tape.transpose(scores), x);
  Tape::Id denominator = tape.add_const(tape.sum(scores), kPoolEps);
  return tape.div_scalar(numerator, denominator);
}

std::uint64_t next_dropout_seed(const ForwardOptions& opts, std::uint64_t* counter) {
  return splitmix64(opts.dropout_seed ^ splitmix64(++*counter));
}

Tape::Id lookup_with_dropout(Tape& tape, Tensor* table,
                             std::span<const std::int32_t> ids,
                             const ForwardOptions& opts, std::uint64_t* counter) {
  Tape::Id embs = tape.embedding_rows(table, ids);
  return tape.dropout(embs, opts.emb_dropout, next_dropout_seed(opts, counter),
                      opts.training);
}

}  // namespace

Tape::Id pool_feature(Tape& tape, Tape::Id embs, PoolNet& net) {
  if (tape.shape(embs).rows == 0) {
    throw EmptyInput("pool_feature: empty embedding list");
  }
  return weighted_row_average(tape, embs, pool_scores(tape, embs, net));
}

Tape::Id pool_forms(Tape& tape, std::span<const FormDatum> pairs, ModelParams& params,
                    const ForwardOptions& opts, std::uint64_t* dropout_counter) {
  if (pairs.empty()) throw EmptyInput("pool_forms: no form pairs");
  std::vector<Tape::Id> rows;
  rows.reserve(pairs.size());
  for (const FormDatum& fd : pairs) {
    Tape::Id k = tape.mean_rows(
        lookup_with_dropout(tape, &params.token_emb, fd.key_ids, opts, dropout_counter));
    Tape::Id v = tape.mean_rows(lookup_with_dropout(tape, &params.token_emb,
                                                    fd.value_ids, opts, dropout_counter));
    std::array<Tape::Id, 2> kv = {k, v};
    rows.push_back(tape.concat_cols(kv));
  }
  Tape::Id stacked = tape.concat_rows(rows);
  return weighted_row_average(tape, stacked, pool_scores(tape, stacked, params.form_net));
}

Tape::Id build_window_vector(Tape& tape, const Window& w, ModelParams& params,
                             const ForwardOptions& opts, std::uint64_t* dropout_counter) {
  std::vector<Tape::Id> parts;
  parts.reserve(static_cast<std::size_t>(params.dims.n_features) + 2);
  for (std::int32_t f = 0; f < params.dims.n_features; ++f) {
    auto it = w.flat_data.find(f);
    if (it == w.flat_data.end()) {
      parts.push_back(tape.zeros({1, params.dims.token_dim}));
    } else {
      Tape::Id embs = lookup_with_dropout(tape, &params.token_emb, it->second, opts,
                                          dropout_counter);
      parts.push_back(pool_feature(tape, embs, params.feature_nets[static_cast<std::size_t>(f)]));
    }
  }
  if (w.form_data.empty()) {
    parts.push_back(tape.zeros({1, 2 * params.dims.token_dim}));
  } else {
    parts.push_back(pool_forms(tape, w.form_data, params, opts, dropout_counter));
  }
  std::int32_t time_index = static_cast<std::int32_t>(
      time_bucket_embedding_index(w.bucket_index, params.dims.max_time_buckets));
  parts.push_back(tape.embedding_rows(&params.time_emb, std::array<std::int32_t, 1>{time_index}));
  return tape.concat_cols(parts);
}

Tape::Id build_forward(Tape& tape, const WindowSequence& seq, ModelParams& params,
                       const ForwardOptions& opts) {
  std::uint64_t dropout_counter = 0;

  static const Window kSyntheticWindow{};  // bucket 0, no data
  std::span<const Window> windows(seq.windows);
  if (windows.empty()) windows = std::span<const Window>(&kSyntheticWindow, 1);

  nd::LstmCellWeights lstm;
  for (int g = 0; g < 4; ++g) {
    lstm.w_x[g] = &params.lstm_wx[g];
    lstm.w_h[g] = &params.lstm_wh[g];
    lstm.b[g] = &params.lstm_b[g];
  }

  Tape::Id h = tape.zeros({1, params.dims.lstm_hidden});
  Tape::Id c = tape.zeros({1, params.dims.lstm_hidden});
  for (const Window& w : windows) {
    Tape::Id x = build_window_vector(tape, w, params, opts, &dropout_counter);
    nd::LstmCellOut out = nd::lstm_cell(tape, x, h, c, lstm);
    h = tape.dropout(out.h, opts.hidden_dropout,
                     next_dropout_seed(opts, &dropout_counter), opts.training);
    c = out.c;
  }
  Tape::Id logit = tape.add(tape.matmul(h, tape.leaf(&params.head_w)),
                            tape.leaf(&params.head_b));
  return tape.sigmoid(logit);
}

double predict_prob(const WindowSequence& seq, ModelParams& params) {
  Tape tape;
  ForwardOptions opts;
  opts.training = false;
  return tape.scalar_value(build_forward(tape, seq, params, opts));
}

// ---------------------------------------------------------------------------
// Checkpoint container
// ---------------------------------------------------------------------------

namespace {

json config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"emb_dropout", c.emb_dropout},
              {"hidden_dropout", c.hidden_dropout},
              {"oversample", c.oversample},
              {"seed", c.seed},
              {"token_dim", c.token_dim},
              {"pool_hidden", c.pool_hidden},
              {"time_dim", c.time_dim},
              {"lstm_hidden", c.lstm_hidden},
              {"window_hours", c.window_hours},
              {"max_windows", c.max_windows},
              {"max_time_buckets", c.max_time_buckets}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.emb_dropout = j.at("emb_dropout").get<double>();
  c.hidden_dropout = j.at("hidden_dropout").get<double>();
  c.oversample = j.at("oversample").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.token_dim = j.at("token_dim").get<int>();
  c.pool_hidden = j.at("pool_hidden").get<int>();
  c.time_dim = j.at("time_dim").get<int>();
  c.lstm_hidden = j.at("lstm_hidden").get<int>();
  c.window_hours = j.at("window_hours").get<int>();
  c.max_windows = j.at("max_windows").get<int>();
  c.max_time_buckets = j.at("max_time_buckets").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(Checkpoint& ckpt, const std::string& path) {
  auto named = ckpt.params.named_params();

  json manifest;
  manifest["version"] = ckpt.format_version;
  manifest["config"] = config_to_json(ckpt.config);
  manifest["vocab_digest"] = ckpt.vocab_digest;
  manifest["best_epoch"] = ckpt.best_epoch;
  manifest["best_val_auroc"] = ckpt.best_val_auroc;
  manifest["dims"] = {{"token_dim", ckpt.params.dims.token_dim},
                      {"pool_hidden", ckpt.params.dims.pool_hidden},
                      {"time_dim", ckpt.params.dims.time_dim},
                      {"lstm_hidden", ckpt.params.dims.lstm_hidden},
                      {"max_time_buckets", ckpt.params.dims.max_time_buckets},
                      {"n_features", ckpt.params.dims.n_features},
                      {"n_tokens", ckpt.params.dims.n_tokens}};
  json tensors = json::array();
  std::int64_t offset = 0;  // in doubles, from the start of the data section
  for (auto& [name, t] : named) {
    tensors.push_back({{"name", name},
                       {"rows", t->shape.rows},
                       {"cols", t->shape.cols},
                       {"offset", offset}});
    offset += t->shape.numel();
  }
  manifest["tensors"] = tensors;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
    out << "RDMT-CKPT 1\n" << manifest.dump() << "\n";
    for (auto& [name, t] : named) {
      out.write(reinterpret_cast<const char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write on checkpoint: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move checkpoint into place: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::string magic, manifest_line;
  if (!std::getline(in, magic) || magic != "RDMT-CKPT 1") {
    throw std::runtime_error("bad checkpoint magic in " + path);
  }
  if (!std::getline(in, manifest_line)) {
    throw std::runtime_error("missing checkpoint manifest in " + path);
  }
  json manifest = json::parse(manifest_line);

  Checkpoint ckpt;
  ckpt.format_version = manifest.at("version").get<int>();
  ckpt.config = config_from_json(manifest.at("config"));
  ckpt.vocab_digest = manifest.at("vocab_digest").get<std::string>();
  ckpt.best_epoch = manifest.at("best_epoch").get<int>();
  ckpt.best_val_auroc = manifest.at("best_val_auroc").get<double>();

  const json& dims_j = manifest.at("dims");
  ModelDims dims;
  dims.token_dim = dims_j.at("token_dim").get<int>();
  dims.pool_hidden = dims_j.at("pool_hidden").get<int>();
  dims.time_dim = dims_j.at("time_dim").get<int>();
  dims.lstm_hidden = dims_j.at("lstm_hidden").get<int>();
  dims.max_time_buckets = dims_j.at("max_time_buckets").get<int>();
  dims.n_features = dims_j.at("n_features").get<std::int32_t>();
  dims.n_tokens = dims_j.at("n_tokens").get<std::int32_t>();
  ckpt.params = init_params(dims, 0);

  auto named = ckpt.params.named_params();
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != named.size()) {
    throw std::runtime_error("checkpoint tensor directory size mismatch");
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    const json& entry = tensors[i];
    auto& [name, t] = named[i];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("rows").get<std::int64_t>() != t->shape.rows ||
        entry.at("cols").get<std::int64_t>() != t->shape.cols) {
      throw std::runtime_error("checkpoint tensor directory mismatch at " + name);
    }
    in.read(reinterpret_cast<char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(t->data.size() * sizeof(double))) {
      throw std::runtime_error("truncated checkpoint data at " + name);
    }
  }
  return ckpt;
}

}  // namespace rdmt
