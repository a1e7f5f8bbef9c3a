#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddgcn/config.hpp"
#include "ddgcn/corpus.hpp"
#include "ddgcn/errors.hpp"
#include "ddgcn/metrics.hpp"
#include "ddgcn/model.hpp"
#include "ddgcn/optim.hpp"
#include "ddgcn/trainer.hpp"
#include "doctest.h"

using namespace ddgcn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void zero_parameters(ModelParams& params) {
  for (auto& [key, t] : named_parameters(params)) {
    for (double& v : t.values_mut()) v = 0.0;
  }
}

UserSample vector_user(const std::string& id, std::size_t posts, std::size_t d, double fill,
                       std::vector<int> labels) {
  UserSample s;
  s.id = id;
  s.vector_posts.assign(posts, std::vector<double>(d, fill));
  s.labels = std::move(labels);
  return s;
}

}  // namespace

TEST_CASE("run config text parsing covers every key and strips comments") {
  RunConfig def = parse_run_config_text("", "mem");
  CHECK(def.model.d == 32);
  CHECK(def.model.depth == 2);
  CHECK(def.model.mu == 0.5);
  CHECK(def.encoder == PayloadKind::tokens);
  CHECK(def.lambda_init == 5.0);
  CHECK(def.epochs == 25);
  CHECK(def.batch_size == 8);

  const std::string text =
      "# full override\n"
      "d = 8        # trailing comment\n"
      "hid = 12\n"
      "depth = 3\n"
      "traits = 2\n"
      "mu = 0.4\n"
      "eps = 1e-5\n"
      "dropout_encoder = 0\n"
      "dropout_other = 0.25\n"
      "variant = gcn\n"
      "single_hop = on\n"
      "undirected = true\n"
      "fixed_graph = false\n"
      "fixed_graph_threshold = 0.25\n"
      "no_special_node = 1\n"
      "l0_enabled = off\n"
      "encoder = vectors\n"
      "lr_encoder = 0.01\n"
      "lr_l2c = 0.02\n"
      "lr_other = 0.03\n"
      "lambda_init = 2\n"
      "lambda_lr = 0.5\n"
      "lambda_ascent = false\n"
      "\n"
      "epochs = 7\n"
      "batch_size = 3\n"
      "seed = 42\n"
      "max_posts = 9\n"
      "max_tokens = 11\n";
  RunConfig cfg = parse_run_config_text(text, "mem");
  CHECK(cfg.model.d == 8);
  CHECK(cfg.model.hid == 12);
  CHECK(cfg.model.depth == 3);
  CHECK(cfg.model.traits == 2);
  CHECK(cfg.model.mu == 0.4);
  CHECK(cfg.model.eps == 1e-5);
  CHECK(cfg.model.dropout_encoder == 0.0);
  CHECK(cfg.model.dropout_other == 0.25);
  CHECK(cfg.model.plain_gcn);
  CHECK(cfg.model.single_hop);
  CHECK(cfg.model.undirected);
  CHECK_FALSE(cfg.model.fixed_graph);
  CHECK(cfg.model.fixed_graph_threshold == 0.25);
  CHECK(cfg.model.no_special_node);
  CHECK_FALSE(cfg.model.l0_enabled);
  CHECK(cfg.encoder == PayloadKind::vectors);
  CHECK(cfg.lr_encoder == 0.01);
  CHECK(cfg.lr_l2c == 0.02);
  CHECK(cfg.lr_other == 0.03);
  CHECK(cfg.lambda_init == 2.0);
  CHECK(cfg.lambda_lr == 0.5);
  CHECK_FALSE(cfg.lambda_ascent);
  CHECK(cfg.epochs == 7);
  CHECK(cfg.batch_size == 3);
  CHECK(cfg.seed == 42);
  CHECK(cfg.max_posts == 9);
  CHECK(cfg.max_tokens == 11);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("run config rejects unknown keys and malformed values with line numbers") {
  try {
    parse_run_config_text("d = 8\nbogus = 1\n", "mem");
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mem:2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config_text("d = abc\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("epochs = 1.5\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("single_hop = maybe\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("variant = dense\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("encoder = onehot\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("d\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("mu =\n", "mem"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(
                      (fs::temp_directory_path() / "ddgcn_missing.cfg").string()),
                  ConfigError);
}

TEST_CASE("config records whether the file pinned the seed") {
  CHECK_FALSE(parse_run_config_text("d = 4\n", "mem").seed_from_file);
  RunConfig cfg = parse_run_config_text("seed = 9\n", "mem");
  CHECK(cfg.seed_from_file);
  CHECK(cfg.seed == 9);
}

TEST_CASE("always predicting class 0 on a balanced trait scores one third") {
  std::vector<std::vector<int>> preds(10, std::vector<int>{0});
  std::vector<std::vector<int>> labels;
  for (int u = 0; u < 10; ++u) labels.push_back({u < 5 ? 1 : 0});
  const MetricsReport r = compute_metrics(preds, labels);
  CHECK(r.average == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("learning-rate groups follow the canonical key scheme") {
  AdamSettings s;
  s.lr_encoder = 0.5;
  s.lr_l2c = 0.25;
  s.lr_other = 0.125;
  CHECK(group_lr("embed", s) == 0.5);
  CHECK(group_lr("branch0.l2c.1.wq", s) == 0.25);
  CHECK(group_lr("branch3.l2c.12.wk", s) == 0.25);
  CHECK(group_lr("branch0.c", s) == 0.125);
  CHECK(group_lr("branch1.wu", s) == 0.125);
  CHECK(group_lr("branch1.bu", s) == 0.125);
  CHECK(group_lr("branch0.gcn.2.w", s) == 0.125);
}

TEST_CASE("adam applies per-group rates and clears gradients") {
  const auto build = [](AdamSettings s) {
    Tensor embed = Tensor::full({1, 2}, 1.0, true);
    Tensor other = Tensor::full({1, 2}, 1.0, true);
    Tensor idle = Tensor::full({1, 1}, 1.0, true);
    Tensor ge = Tensor::constant({1, 2}, {2.0, -3.0});
    Tensor go = Tensor::constant({1, 2}, {4.0, 5.0});
    Tensor loss = reduce_sum(add(mul(embed, ge), mul(other, go)));
    backward(loss);
    Adam opt({{"embed", embed}, {"branch0.c", other}, {"branch0.wu", idle}}, s);
    opt.step();
    return std::tuple{embed, other, idle, opt.steps()};
  };

  AdamSettings a;
  a.lr_encoder = 1e-2;
  a.lr_other = 1e-3;
  auto [embed_a, other_a, idle_a, steps_a] = build(a);
  CHECK(steps_a == 1);

  // First-step Adam update reduces to lr * g / (|g| + eps) up to the paired
  // bias corrections, which this mirrors term for term.
  const auto first_step = [](double x0, double lr, double g, const AdamSettings& s) {
    const double m = (1.0 - s.beta1) * g;
    const double v = (1.0 - s.beta2) * g * g;
    const double mh = m / (1.0 - s.beta1);
    const double vh = v / (1.0 - s.beta2);
    return x0 - lr * mh / (std::sqrt(vh) + s.eps);
  };
  CHECK(embed_a.values()[0] == doctest::Approx(first_step(1.0, 1e-2, 2.0, a)).epsilon(1e-12));
  CHECK(embed_a.values()[1] == doctest::Approx(first_step(1.0, 1e-2, -3.0, a)).epsilon(1e-12));
  CHECK(other_a.values()[0] == doctest::Approx(first_step(1.0, 1e-3, 4.0, a)).epsilon(1e-12));

  // A parameter that never entered the graph keeps its value exactly.
  CHECK(idle_a.values()[0] == 1.0);

  // Gradients are consumed by the step.
  CHECK_FALSE(embed_a.has_grad());
  CHECK_FALSE(other_a.has_grad());

  // Changing the non-encoder rate leaves the encoder update bitwise intact.
  AdamSettings b = a;
  b.lr_other = 0.5;
  auto [embed_b, other_b, idle_b, steps_b] = build(b);
  CHECK(embed_b.values()[0] == embed_a.values()[0]);
  CHECK(embed_b.values()[1] == embed_a.values()[1]);
  CHECK(other_b.values()[0] != other_a.values()[0]);
}

TEST_CASE("adam rejects an empty or non-trainable parameter list") {
  CHECK_THROWS_AS(Adam({}, AdamSettings{}), ConfigError);
  Tensor frozen = Tensor::constant({1, 1}, {1.0});
  CHECK_THROWS_AS(Adam({{"embed", frozen}}, AdamSettings{}), ConfigError);
}

TEST_CASE("sparsity accumulator matches a brute-force recount") {
  constexpr std::size_t kTraits = 2, kLayers = 3, kNodes = 4, kTraces = 5;
  std::mt19937_64 rng(99);

  std::vector<ForwardTrace> traces;
  for (std::size_t s = 0; s < kTraces; ++s) {
    ForwardTrace tr;
    tr.posts = kNodes - 1;
    for (std::size_t t = 0; t < kTraits; ++t) {
      TraitTrace tt;
      tt.logits = Tensor::zeros({1, 2});
      for (std::size_t k = 0; k < kLayers; ++k) {
        auto g = std::make_shared<LayerGraph>();
        g->raw = Tensor::zeros({kNodes, kNodes});
        g->masked = Tensor::zeros({kNodes, kNodes});
        g->kept.assign(kNodes * kNodes, 0);
        for (auto& bit : g->kept) bit = static_cast<std::uint8_t>(rng() % 2);
        g->edge_count = 0;
        for (auto bit : g->kept) g->edge_count += bit;
        tt.graphs.push_back(std::move(g));
      }
      tr.traits.push_back(std::move(tt));
    }
    traces.push_back(std::move(tr));
  }

  SparsityAccum accum(kTraits, kLayers);
  for (const auto& tr : traces) accum.add(tr);
  const std::vector<SparsityRow> rows = accum.rows(7);
  REQUIRE(rows.size() == kTraits * kLayers);

  for (const SparsityRow& row : rows) {
    CHECK(row.epoch == 7);
    // Dumb per-entry recount over every stored mask for this (trait, layer).
    long long kept = 0, possible = 0, u_kept = 0, u_possible = 0;
    for (const auto& tr : traces) {
      const auto& g = *tr.traits[static_cast<std::size_t>(row.trait)]
                           .graphs[static_cast<std::size_t>(row.layer - 1)];
      const std::size_t m = g.nodes();
      const std::size_t u = m - 1;
      possible += static_cast<long long>(m * m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          kept += g.kept[i * m + j];
          if ((i == u) != (j == u)) {
            u_kept += g.kept[i * m + j];
            ++u_possible;
          }
        }
      }
    }
    CHECK(row.graph_ratio == static_cast<double>(kept) / static_cast<double>(possible));
    CHECK(row.unode_ratio == static_cast<double>(u_kept) / static_cast<double>(u_possible));
  }
}

TEST_CASE("sparsity csv layout") {
  std::vector<SparsityRow> rows{{2, 1, 3, 0.5, 0.25}};
  const std::string csv = sparsity_csv(rows);
  CHECK(csv == "epoch,trait,layer,graph_ratio,unode_ratio\n2,1,3,0.5,0.25\n");
}

TEST_CASE("a zero-weight model keeps no edges") {
  ModelConfig cfg;
  cfg.d = 4;
  cfg.hid = 4;
  cfg.depth = 2;
  cfg.traits = 2;
  cfg.dropout_encoder = 0.0;
  cfg.dropout_other = 0.0;
  std::mt19937_64 rng(1);
  ModelParams params = init_model(cfg, 0, rng);
  zero_parameters(params);

  std::vector<UserSample> samples{vector_user("a", 3, 4, 0.5, {0, 1}),
                                  vector_user("b", 2, 4, -0.25, {1, 0})};
  const auto rows = sparsity_snapshot(params, cfg, PayloadKind::vectors, samples);
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(row.epoch == 0);
    CHECK(row.graph_ratio == 0.0);
    CHECK(row.unode_ratio == 0.0);
  }
}

TEST_CASE("training aborts with a located diagnostic on non-finite data") {
  RunConfig cfg;
  cfg.model.d = 4;
  cfg.model.hid = 4;
  cfg.model.depth = 2;
  cfg.model.traits = 2;
  cfg.encoder = PayloadKind::vectors;
  cfg.epochs = 1;
  cfg.batch_size = 2;

  const double bad = std::numeric_limits<double>::quiet_NaN();
  std::vector<UserSample> train{vector_user("ok", 2, 4, 0.5, {0, 1}),
                                vector_user("poison", 2, 4, bad, {1, 0})};
  std::vector<UserSample> val{vector_user("v", 2, 4, 0.25, {0, 0})};

  const fs::path out = fresh_dir("ddgcn_nan_run");
  try {
    train_model(cfg, train, val, 0, out.string());
    FAIL("non-finite forward did not abort");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    CHECK(std::string(e.what()).find("trait") != std::string::npos);
  }
}

TEST_CASE("training is reproducible and its artifacts agree with each other") {
  const fs::path corpus = fresh_dir("ddgcn_harness_corpus");
  SynthConfig synth;
  synth.train_users = 20;
  synth.val_users = 8;
  synth.test_users = 8;
  synth_generate(synth, corpus.string());

  Vocabulary vocab = Vocabulary::load((corpus / "vocab.txt").string());
  const auto train_set =
      load_jsonl((corpus / "train.jsonl").string(), PayloadKind::tokens, 2, &vocab);
  const auto val_set = load_jsonl((corpus / "val.jsonl").string(), PayloadKind::tokens, 2, &vocab);
  REQUIRE(train_set.size() == 20);
  REQUIRE(val_set.size() == 8);

  RunConfig cfg;
  cfg.model.d = 8;
  cfg.model.hid = 8;
  cfg.model.depth = 2;
  cfg.model.traits = 2;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 5;

  const fs::path run1 = fresh_dir("ddgcn_harness_run1");
  const fs::path run2 = fresh_dir("ddgcn_harness_run2");
  TrainArtifacts art1 = train_model(cfg, train_set, val_set, vocab.size(), run1.string());
  TrainArtifacts art2 = train_model(cfg, train_set, val_set, vocab.size(), run2.string());

  for (const char* name : {"checkpoint.bin", "metrics.json", "sparsity.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(run1 / name));
    CHECK(slurp(run1 / name) == slurp(run2 / name));
  }

  CHECK(art1.best_val.average == art2.best_val.average);
  CHECK(art1.lambda_final == art2.lambda_final);
  CHECK(art1.best_val.average >= 0.0);
  CHECK(art1.best_val.average <= 1.0);
  CHECK(art1.best_val.seed == cfg.seed);
  CHECK(art1.best_val.epoch >= 1);

  // The edge penalty multiplier climbs while classification loss is positive.
  CHECK(art1.lambda_final > cfg.lambda_init);
  CHECK(art1.lambda_final <= cfg.lambda_max);

  // One sparsity row per (epoch, trait, layer), ratios in range.
  CHECK(art1.sparsity.size() == cfg.epochs * 2 * 2);
  for (const auto& row : art1.sparsity) {
    CHECK(row.graph_ratio >= 0.0);
    CHECK(row.graph_ratio <= 1.0);
    CHECK(row.unode_ratio >= 0.0);
    CHECK(row.unode_ratio <= 1.0);
  }
  CHECK(slurp(run1 / "sparsity.csv") == sparsity_csv(art1.sparsity));
  CHECK(slurp(run1 / "metrics.json") == metrics_json(art1.best_val) + "\n");

  // Reloading the saved checkpoint reproduces the recorded validation score.
  ModelParams loaded = load_model(art1.checkpoint_path, cfg.model, vocab.size());
  MetricsReport again = evaluate_model(loaded, cfg.model, cfg.encoder, val_set);
  CHECK(again.average == art1.best_val.average);
  REQUIRE(again.per_trait.size() == art1.best_val.per_trait.size());
  for (std::size_t t = 0; t < again.per_trait.size(); ++t) {
    CHECK(again.per_trait[t] == art1.best_val.per_trait[t]);
  }

  // With the edge penalty disabled the multiplier never moves.
  RunConfig off = cfg;
  off.model.l0_enabled = false;
  off.epochs = 1;
  const fs::path run3 = fresh_dir("ddgcn_harness_run3");
  TrainArtifacts art3 = train_model(off, train_set, val_set, vocab.size(), run3.string());
  CHECK(art3.lambda_final == off.lambda_init);
}

TEST_CASE("training rejects empty splits and a bag encoder without vocabulary") {
  RunConfig cfg;
  cfg.model.d = 4;
  cfg.model.hid = 4;
  cfg.encoder = PayloadKind::vectors;
  std::vector<UserSample> one{vector_user("a", 2, 4, 0.5, {0, 1, 0, 1})};
  const fs::path out = fresh_dir("ddgcn_reject_run");
  CHECK_THROWS_AS(train_model(cfg, {}, one, 0, out.string()), DataError);
  CHECK_THROWS_AS(train_model(cfg, one, {}, 0, out.string()), DataError);
  CHECK_THROWS_AS(evaluate_model(ModelParams{}, cfg.model, cfg.encoder, {}), DataError);

  RunConfig bag;
  bag.encoder = PayloadKind::tokens;
  CHECK_THROWS_AS(train_model(bag, one, one, 0, out.string()), ConfigError);
}

TEST_CASE("whole-model gradient check passes and guards its fixture size") {
  ModelConfig cfg;
  cfg.d = 6;
  cfg.hid = 5;
  cfg.depth = 2;
  cfg.traits = 2;
  FullCheckReport report = run_full_gradcheck(cfg, 3, 11);
  CHECK(report.passed);
  CHECK(report.max_rel_err < 1e-4);
  CHECK(report.entries > 0);
  CHECK(report.attempts >= 1);

  ModelConfig huge;
  huge.d = 32;
  huge.hid = 32;
  huge.depth = 10;
  huge.traits = 4;
  CHECK_THROWS_AS(run_full_gradcheck(huge, 50, 1), ConfigError);
}

TEST_CASE("depth sweep grid") {
  const std::vector<std::size_t> expect{1, 2, 3, 4, 5, 6, 9, 12, 15, 18, 21, 24};
  CHECK(depth_grid() == expect);
}
