#include "ddgcn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddgcn/errors.hpp"
#include "ddgcn/metrics.hpp"
#include "json.hpp"

namespace ddgcn {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void line_error(const std::string& path, std::size_t line, const std::string& msg) {
  throw DataError(path + ":" + std::to_string(line) + ": " + msg);
}

// Bounded draws against the raw engine keep the generated bytes independent
// of the standard library's distribution implementations.
std::size_t rand_index(std::mt19937_64& rng, std::size_t n) { return rng() % n; }
double rand01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string signal_token(std::size_t trait, int cls) {
  return "sig" + std::to_string(trait) + "c" + std::to_string(cls);
}

}  // namespace

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) add(t);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  Vocabulary v;
  std::string tok;
  while (std::getline(in, tok)) {
    if (!tok.empty()) v.add(tok);
  }
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (std::size_t id = 2; id < id_to_token_.size(); ++id) out << id_to_token_[id] << "\n";
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_.emplace(token, id);
  return id;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id out of range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<UserSample> load_jsonl(const std::string& path, PayloadKind kind,
                                   std::size_t traits, const Vocabulary* vocab,
                                   const LoadOptions& opts) {
  if (kind == PayloadKind::tokens && vocab == nullptr) {
    throw ConfigError("token-schema loading requires a vocabulary");
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::vector<std::string> stop;
  stop.reserve(opts.stopwords.size());
  for (const auto& s : opts.stopwords) stop.push_back(lower(s));

  std::vector<UserSample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      line_error(path, lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) line_error(path, lineno, "record is not an object");

    UserSample s;
    if (!rec.contains("id") || !rec["id"].is_string()) {
      line_error(path, lineno, "missing string field \"id\"");
    }
    s.id = rec["id"].get<std::string>();

    if (!rec.contains("labels") || !rec["labels"].is_array()) {
      line_error(path, lineno, "missing array field \"labels\"");
    }
    for (const auto& l : rec["labels"]) {
      if (!l.is_number_integer()) line_error(path, lineno, "labels must be integers");
      const int y = l.get<int>();
      if (y != 0 && y != 1) line_error(path, lineno, "label must be 0 or 1");
      s.labels.push_back(y);
    }
    if (s.labels.size() != traits) {
      line_error(path, lineno, "expected " + std::to_string(traits) + " labels, got " +
                                   std::to_string(s.labels.size()));
    }

    if (kind == PayloadKind::tokens) {
      if (!rec.contains("posts") || !rec["posts"].is_array()) {
        line_error(path, lineno, "missing array field \"posts\"");
      }
      std::size_t taken = 0;
      for (const auto& p : rec["posts"]) {
        if (taken == opts.max_posts) break;
        ++taken;
        if (!p.is_string()) line_error(path, lineno, "posts must be strings");
        std::istringstream words(p.get<std::string>());
        std::vector<int> ids;
        std::string w;
        while (ids.size() < opts.max_tokens && words >> w) {
          if (!stop.empty() &&
              std::find(stop.begin(), stop.end(), lower(w)) != stop.end()) {
            continue;
          }
          ids.push_back(vocab->lookup(w));
        }
        if (!ids.empty()) s.token_posts.push_back(std::move(ids));
      }
      if (s.token_posts.empty()) line_error(path, lineno, "user has no usable posts");
    } else {
      if (!rec.contains("vectors") || !rec["vectors"].is_array()) {
        line_error(path, lineno, "missing array field \"vectors\"");
      }
      for (const auto& v : rec["vectors"]) {
        if (s.vector_posts.size() == opts.max_posts) break;
        if (!v.is_array()) line_error(path, lineno, "vectors must be arrays of numbers");
        std::vector<double> row;
        for (const auto& x : v) {
          if (!x.is_number()) line_error(path, lineno, "vectors must be arrays of numbers");
          row.push_back(x.get<double>());
        }
        if (!s.vector_posts.empty() && row.size() != s.vector_posts.front().size()) {
          line_error(path, lineno, "inconsistent vector lengths");
        }
        s.vector_posts.push_back(std::move(row));
      }
      if (s.vector_posts.empty()) line_error(path, lineno, "user has no vectors");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

// Sums each column's contributions in ascending value order: the result then
// depends only on the multiset of contributions, never on post order.
double sorted_sum(std::vector<double>& xs) {
  std::sort(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

}  // namespace

NodeMatrix encode_bag(const UserSample& sample, const Tensor& embeddings,
                      double dropout_rate, bool training, std::mt19937_64& rng) {
  if (sample.token_posts.empty()) {
    throw DataError("encode_bag: sample '" + sample.id + "' has no token posts");
  }
  if (embeddings.rank() != 2) {
    throw ConfigError("encode_bag: embedding table must be rank-2, got " +
                      shape_str(embeddings.shape()));
  }
  const std::size_t n = sample.token_posts.size();
  const std::size_t vocab = embeddings.rows();

  // Selector rows: post i pools its tokens with weight 1/len_i; matmul with
  // the embedding table then yields mean embeddings with gradient flow.
  std::vector<double> sel((n + 1) * vocab, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& post = sample.token_posts[i];
    std::size_t len = 0;
    for (int id : post) {
      if (id != Vocabulary::kPad) ++len;
    }
    if (len == 0) {
      throw DataError("encode_bag: post " + std::to_string(i) + " of sample '" + sample.id +
                      "' has no tokens to pool");
    }
    const double w = 1.0 / static_cast<double>(len);
    for (int id : post) {
      if (id == Vocabulary::kPad) continue;
      if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
        throw DataError("encode_bag: token id " + std::to_string(id) +
                        " outside embedding table of " + std::to_string(vocab) + " rows");
      }
      sel[i * vocab + static_cast<std::size_t>(id)] += w;
    }
  }
  std::vector<double> column;
  for (std::size_t v = 0; v < vocab; ++v) {
    column.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double x = sel[i * vocab + v];
      if (x != 0.0) column.push_back(x);
    }
    if (!column.empty()) {
      sel[n * vocab + v] = sorted_sum(column) / static_cast<double>(n);
    }
  }

  Tensor selector = Tensor::constant({n + 1, vocab}, std::move(sel));
  Tensor h = matmul(selector, embeddings);
  h = dropout(h, dropout_rate, training, rng);
  return {h, n};
}

NodeMatrix load_precomputed(const UserSample& sample, std::size_t d) {
  if (sample.vector_posts.empty()) {
    throw DataError("load_precomputed: sample '" + sample.id + "' has no vector posts");
  }
  const std::size_t n = sample.vector_posts.size();
  for (const auto& row : sample.vector_posts) {
    if (row.size() != d) {
      throw DataError("load_precomputed: sample '" + sample.id + "' has a " +
                      std::to_string(row.size()) + "-dim vector, config expects " +
                      std::to_string(d));
    }
  }
  std::vector<double> values((n + 1) * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) values[i * d + j] = sample.vector_posts[i][j];
  }
  std::vector<double> column(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = sample.vector_posts[i][j];
    values[n * d + j] = sorted_sum(column) / static_cast<double>(n);
  }
  return {Tensor::constant({n + 1, d}, std::move(values)), n};
}

namespace {

void write_split(const std::string& path, const std::string& id_prefix, std::size_t users,
                 const SynthConfig& cfg, std::size_t n_sig, std::size_t noise_tokens,
                 std::mt19937_64& rng) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path);
  const std::size_t n = cfg.posts_per_user;
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<int> labels(cfg.traits);
    for (auto& y : labels) y = rand01(rng) < cfg.positive_rate ? 1 : 0;

    // Posts drawing a signal, chosen by partial Fisher-Yates.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n_sig; ++i) {
      std::swap(idx[i], idx[i + rand_index(rng, n - i)]);
    }
    std::vector<int> post_trait(n, -1);  // -1: pure noise
    for (std::size_t j = 0; j < n_sig; ++j) {
      post_trait[idx[j]] = static_cast<int>(j % cfg.traits);
    }

    std::vector<std::string> posts(n);
    for (std::size_t p = 0; p < n; ++p) {
      std::vector<std::string> toks(cfg.post_len);
      for (auto& t : toks) t = "noise_" + std::to_string(rand_index(rng, noise_tokens));
      if (post_trait[p] >= 0) {
        const auto t = static_cast<std::size_t>(post_trait[p]);
        toks[rand_index(rng, cfg.post_len)] = signal_token(t, labels[t]);
      }
      std::string joined;
      for (std::size_t k = 0; k < toks.size(); ++k) {
        if (k) joined += ' ';
        joined += toks[k];
      }
      posts[p] = std::move(joined);
    }

    nlohmann::json rec;
    rec["id"] = id_prefix + std::to_string(u);
    rec["labels"] = labels;
    rec["posts"] = posts;
    out << rec.dump() << "\n";
  }
}

}  // namespace

void synth_generate(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.traits == 0 || cfg.posts_per_user == 0 || cfg.post_len == 0) {
    throw ConfigError("synth: traits, posts, and post length must be positive");
  }
  if (cfg.noise_ratio < 0.0 || cfg.noise_ratio > 1.0) {
    throw ConfigError("synth: noise_ratio must lie in [0, 1]");
  }
  if (cfg.vocab_size < 2 * cfg.traits + 1) {
    throw ConfigError("synth: vocab_size must exceed 2*traits signal tokens plus noise");
  }
  const auto n_sig = static_cast<std::size_t>(
      std::llround((1.0 - cfg.noise_ratio) * static_cast<double>(cfg.posts_per_user)));
  if (n_sig < cfg.traits) {
    throw ConfigError("synth: only " + std::to_string(n_sig) +
                      " signal posts per user cannot cover " + std::to_string(cfg.traits) +
                      " traits; lower noise_ratio or raise posts_per_user");
  }
  const std::size_t noise_tokens = cfg.vocab_size - 2 * cfg.traits;

  std::filesystem::create_directories(out_dir);
  Vocabulary vocab;
  for (std::size_t t = 0; t < cfg.traits; ++t) {
    vocab.add(signal_token(t, 0));
    vocab.add(signal_token(t, 1));
  }
  for (std::size_t j = 0; j < noise_tokens; ++j) vocab.add("noise_" + std::to_string(j));
  vocab.save(out_dir + "/vocab.txt");

  std::mt19937_64 rng(cfg.seed);
  write_split(out_dir + "/train.jsonl", "tr", cfg.train_users, cfg, n_sig, noise_tokens, rng);
  write_split(out_dir + "/val.jsonl", "va", cfg.val_users, cfg, n_sig, noise_tokens, rng);
  write_split(out_dir + "/test.jsonl", "te", cfg.test_users, cfg, n_sig, noise_tokens, rng);
}

double signal_vote_macro_f1(const std::vector<UserSample>& samples, const Vocabulary& vocab,
                            std::size_t traits) {
  std::vector<std::vector<int>> predictions, labels;
  for (const auto& s : samples) {
    std::vector<int> pred(traits);
    for (std::size_t t = 0; t < traits; ++t) {
      const int id0 = vocab.lookup(signal_token(t, 0));
      const int id1 = vocab.lookup(signal_token(t, 1));
      if (id0 == Vocabulary::kUnk || id1 == Vocabulary::kUnk) {
        throw ConfigError("signal vote: vocabulary lacks the trait " + std::to_string(t) +
                          " signal tokens");
      }
      long long votes0 = 0, votes1 = 0;
      for (const auto& post : s.token_posts) {
        if (std::find(post.begin(), post.end(), id0) != post.end()) ++votes0;
        if (std::find(post.begin(), post.end(), id1) != post.end()) ++votes1;
      }
      pred[t] = votes1 > votes0 ? 1 : 0;
    }
    predictions.push_back(std::move(pred));
    labels.push_back(s.labels);
  }
  return compute_metrics(predictions, labels).average;
}

}  // namespace ddgcn
