#include "rdmt/featurize.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rdmt/hash.hpp"

namespace rdmt {

namespace {

// Decodes one UTF-8 code point at s[i]; advances i. Invalid bytes decode as
// U+FFFD and advance by one so tokenization never stalls.
char32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c = s[i];
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra;
  char32_t cp;
  if ((c & 0xE0) == 0xC0) {
    extra = 1;
    cp = c & 0x1F;
  } else if ((c & 0xF0) == 0xE0) {
    extra = 2;
    cp = c & 0x0F;
  } else if ((c & 0xF8) == 0xF0) {
    extra = 3;
    cp = c & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  }
  i += extra + 1;
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_digit_cp(char32_t cp) { return cp >= '0' && cp <= '9'; }

bool is_letter_cp(char32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  // Latin-1 Supplement letters, excluding multiplication/division signs.
  if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;
  // Latin Extended-A and -B cover the rest of Spanish-adjacent text.
  if (cp >= 0x100 && cp <= 0x24F) return true;
  return false;
}

char32_t to_lower_cp(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  return cp;
}

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c += 0x20;
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize_text(const std::string& s) {
  std::vector<std::string> out;
  std::string current;
  std::size_t i = 0;
  while (i < s.size()) {
    char32_t cp = decode_utf8(s, i);
    if (is_letter_cp(cp) || is_digit_cp(cp)) {
      encode_utf8(to_lower_cp(cp), current);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string feature_path(const EventRecord& r, const std::string& field) {
  return ascii_lower(std::string(entity_name(r.entity)) + "." + field);
}

Vocabulary build_vocab(const std::vector<PatientHistory>& train_histories,
                       int min_token_count, int max_features) {
  std::map<std::string, std::int64_t> token_counts;
  std::map<std::string, std::int64_t> feature_counts;

  for (const auto& h : train_histories) {
    for (const auto& r : h.events) {
      if (r.entity == Entity::kForm) {
        for (const auto& [k, v] : r.form_pairs) {
          for (auto& t : tokenize_text(k)) ++token_counts[t];
          for (auto& t : tokenize_text(v)) ++token_counts[t];
        }
      } else {
        for (const auto& [field, value] : r.payload) {
          ++feature_counts[feature_path(r, field)];
          for (auto& t : tokenize_text(value)) ++token_counts[t];
        }
      }
    }
  }
  if (token_counts.empty()) throw EmptyCorpus("no tokens in training corpus");

  Vocabulary v;
  v.min_token_count = min_token_count;
  v.token_to_id["<pad>"] = kPadToken;
  v.token_to_id["<oov>"] = kOovToken;

  // Count desc, then lexicographic. std::map iteration already gives the
  // lexicographic order, so a stable sort by count finishes the job.
  std::vector<std::pair<std::string, std::int64_t>> tokens(token_counts.begin(),
                                                           token_counts.end());
  std::stable_sort(tokens.begin(), tokens.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  TokenId next_token = 2;
  for (const auto& [token, count] : tokens) {
    if (count >= min_token_count) v.token_to_id[token] = next_token++;
  }

  std::vector<std::pair<std::string, std::int64_t>> features(feature_counts.begin(),
                                                             feature_counts.end());
  std::stable_sort(features.begin(), features.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(features.size()) > max_features) features.resize(max_features);
  std::sort(features.begin(), features.end());
  FeatureId next_feature = 0;
  for (const auto& [path, count] : features) v.feature_to_id[path] = next_feature++;

  return v;
}

namespace {

std::string canonical_vocab_text(const Vocabulary& v) {
  // T lines in id order, then F lines in id order.
  std::vector<const std::string*> tokens(v.token_to_id.size());
  for (const auto& [t, id] : v.token_to_id) tokens[static_cast<std::size_t>(id)] = &t;
  std::vector<const std::string*> features(v.feature_to_id.size());
  for (const auto& [f, id] : v.feature_to_id) features[static_cast<std::size_t>(id)] = &f;

  std::ostringstream out;
  out << "RDMT-VOCAB 1\n";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out << "T\t" << *tokens[i] << "\t" << i << "\n";
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << "F\t" << *features[i] << "\t" << i << "\n";
  }
  return out.str();
}

}  // namespace

void save_vocab(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path);
  out << canonical_vocab_text(v);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocab file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "RDMT-VOCAB 1") {
    throw std::runtime_error("bad vocab header in " + path);
  }
  Vocabulary v;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = line.rfind('\t');
    if (tab1 == std::string::npos || tab2 == tab1) {
      throw std::runtime_error("bad vocab line: " + line);
    }
    std::string kind = line.substr(0, tab1);
    std::string name = line.substr(tab1 + 1, tab2 - tab1 - 1);
    int id = std::stoi(line.substr(tab2 + 1));
    if (kind == "T") {
      v.token_to_id[name] = id;
    } else if (kind == "F") {
      v.feature_to_id[name] = id;
    } else {
      throw std::runtime_error("bad vocab line kind: " + kind);
    }
  }
  return v;
}

std::string vocab_digest(const Vocabulary& v) {
  return hex64(fnv1a64(canonical_vocab_text(v)));
}

std::vector<EncodedDatum> encode_example(const Example& e, const Vocabulary& v) {
  std::vector<EncodedDatum> out;
  for (const auto& r : e.history) {
    Instant ts = r.timestamp ? *r.timestamp : e.anchor_time;
    if (r.entity == Entity::kForm) {
      for (const auto& [k, val] : r.form_pairs) {
        FormDatum fd;
        for (auto& t : tokenize_text(k)) fd.key_ids.push_back(v.token_id(t));
        for (auto& t : tokenize_text(val)) fd.value_ids.push_back(v.token_id(t));
        if (fd.key_ids.empty() || fd.value_ids.empty()) continue;
        EncodedDatum d;
        d.timestamp = ts;
        d.is_form = true;
        d.form = std::move(fd);
        out.push_back(std::move(d));
      }
    } else {
      for (const auto& [field, value] : r.payload) {
        auto it = v.feature_to_id.find(feature_path(r, field));
        if (it == v.feature_to_id.end()) continue;
        for (auto& t : tokenize_text(value)) {
          EncodedDatum d;
          d.timestamp = ts;
          d.feature_id = it->second;
          d.token_id = v.token_id(t);
          out.push_back(std::move(d));
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const EncodedDatum& a, const EncodedDatum& b) {
    return a.timestamp < b.timestamp;
  });
  return out;
}

WindowSequence windowize(const std::vector<EncodedDatum>& data, Instant anchor,
                         int window_hours, int max_windows) {
  const std::int64_t window_seconds = window_hours * kSecondsPerHour;
  std::map<int, Window> buckets;
  for (const auto& d : data) {
    if (d.timestamp > anchor) {
      throw FutureEvent("event at " + format_rfc3339(d.timestamp) + " after anchor " +
                        format_rfc3339(anchor));
    }
    int j = static_cast<int>((anchor - d.timestamp) / window_seconds);
    auto& w = buckets[j];
    w.bucket_index = j;
    if (d.is_form) {
      w.form_data.push_back(d.form);
    } else {
      w.flat_data[d.feature_id].push_back(d.token_id);
    }
  }

  WindowSequence seq;
  // map iterates newest-first by bucket index; emit oldest -> newest.
  for (auto it = buckets.rbegin(); it != buckets.rend(); ++it) {
    seq.windows.push_back(std::move(it->second));
  }
  if (static_cast<int>(seq.windows.size()) > max_windows) {
    seq.windows.erase(seq.windows.begin(),
                      seq.windows.end() - max_windows);
  }
  return seq;
}

}  // namespace rdmt
