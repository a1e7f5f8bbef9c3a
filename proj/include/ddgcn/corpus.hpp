#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddgcn/tensor.hpp"

namespace ddgcn {

// One user's unordered post set plus T binary trait labels. Exactly one of
// token_posts / vector_posts is populated, depending on the dataset schema.
struct UserSample {
  std::string id;
  std::vector<std::vector<int>> token_posts;
  std::vector<std::vector<double>> vector_posts;
  std::vector<int> labels;

  std::size_t post_count() const {
    return token_posts.empty() ? vector_posts.size() : token_posts.size();
  }
};

enum class PayloadKind { tokens, vectors };

// Token table with two reserved ids: 0 = padding (excluded from pooling),
// 1 = unknown. File form lists one token per line starting at id 2.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int add(const std::string& token);          // existing id if already present
  int lookup(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

struct LoadOptions {
  std::size_t max_posts = 50;
  std::size_t max_tokens = 70;
  // Dropped from posts before truncation; matched case-insensitively against
  // whole tokens. Posts left empty by the filter are discarded.
  std::vector<std::string> stopwords;
};

// Reads newline-delimited JSON user records in file order. Token posts are
// whitespace-tokenized through the vocabulary (required for the tokens
// schema). Malformed lines raise DataError naming the 1-based line number.
std::vector<UserSample> load_jsonl(const std::string& path, PayloadKind kind,
                                   std::size_t traits, const Vocabulary* vocab,
                                   const LoadOptions& opts = {});

// Node matrix h: rows 0..N-1 are post representations, row N is the special
// user node, initialized as the per-column mean of the post rows.
struct NodeMatrix {
  Tensor h;
  std::size_t posts = 0;
};

// Trainable bag-of-embeddings encoder: each post row is the mean embedding of
// its non-padding tokens. Gradient flows into the embedding table. The user
// row is accumulated per column in sorted order, so it is bitwise invariant
// under post permutation.
NodeMatrix encode_bag(const UserSample& sample, const Tensor& embeddings,
                      double dropout_rate, bool training, std::mt19937_64& rng);

// Precomputed-vector posts copied verbatim as constants; nothing trains
// through the result. The user row uses the same sorted mean as encode_bag.
NodeMatrix load_precomputed(const UserSample& sample, std::size_t d);

struct SynthConfig {
  std::size_t train_users = 500;
  std::size_t val_users = 100;
  std::size_t test_users = 100;
  std::size_t posts_per_user = 8;
  std::size_t traits = 2;
  std::size_t vocab_size = 24;  // 2*traits signal tokens, the rest noise
  std::size_t post_len = 8;
  double noise_ratio = 0.5;
  double positive_rate = 0.5;  // per-trait probability of label 1
  std::uint64_t seed = 1;
};

// Writes train.jsonl, val.jsonl, test.jsonl, and vocab.txt under out_dir.
// Byte-identical output for identical config. Each trait plants one signal
// token per class; exactly round((1-noise_ratio)*posts) posts per user carry
// a signal, spread over traits round-robin so every trait is recoverable.
void synth_generate(const SynthConfig& cfg, const std::string& out_dir);

// Brute-force ceiling for synthetic corpora: per trait, majority vote between
// posts containing the class-1 and class-0 signal tokens (tie -> 0). Returns
// the average macro-F1 over traits.
double signal_vote_macro_f1(const std::vector<UserSample>& samples, const Vocabulary& vocab,
                            std::size_t traits);

}  // namespace ddgcn
