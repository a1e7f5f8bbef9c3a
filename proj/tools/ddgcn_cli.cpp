#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ddgcn/checkpoint.hpp"
#include "ddgcn/config.hpp"
#include "ddgcn/corpus.hpp"
#include "ddgcn/errors.hpp"
#include "ddgcn/metrics.hpp"
#include "ddgcn/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ddgcn;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string data_path;
  std::string out_dir = "out";
  std::string checkpoint;
  std::vector<std::uint64_t> seeds;
  std::size_t depth = 0;
  std::string variant;
  std::string l0;
  bool undirected = false;
  bool single_hop = false;
  double fixed_graph_threshold = 0.0;
  bool no_special_node = false;
  std::string encoder;
};

void add_model_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "flat key = value configuration file");
  sub->add_option("--depth", f.depth, "override the propagation depth");
  sub->add_option("--variant", f.variant, "propagation style: ddgcn or gcn")
      ->check(CLI::IsMember({"ddgcn", "gcn"}));
  sub->add_option("--l0", f.l0, "edge penalty: on or off")->check(CLI::IsMember({"on", "off"}));
  sub->add_flag("--undirected", f.undirected, "symmetrize edge scores before thresholding");
  sub->add_flag("--single-hop", f.single_hop, "reuse the layer-1 graph at every layer");
  sub->add_option("--fixed-graph", f.fixed_graph_threshold,
                  "use a cosine-similarity graph with this threshold instead of learning one");
  sub->add_flag("--no-special-node", f.no_special_node,
                "classify on the mean of post rows instead of the user node");
  sub->add_option("--encoder", f.encoder, "post encoder: bag or vectors")
      ->check(CLI::IsMember({"bag", "vectors"}));
}

RunConfig resolve_config(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{} : parse_run_config(f.config_path);
  if (sub->count("--depth") > 0) cfg.model.depth = f.depth;
  if (sub->count("--variant") > 0) cfg.model.plain_gcn = (f.variant == "gcn");
  if (sub->count("--l0") > 0) cfg.model.l0_enabled = (f.l0 == "on");
  if (f.undirected) cfg.model.undirected = true;
  if (f.single_hop) cfg.model.single_hop = true;
  if (sub->count("--fixed-graph") > 0) {
    cfg.model.fixed_graph = true;
    cfg.model.fixed_graph_threshold = f.fixed_graph_threshold;
  }
  if (f.no_special_node) cfg.model.no_special_node = true;
  if (sub->count("--encoder") > 0) {
    cfg.encoder = (f.encoder == "bag") ? PayloadKind::tokens : PayloadKind::vectors;
  }
  cfg.validate();
  return cfg;
}

// --data accepts a corpus directory (train.jsonl / val.jsonl / test.jsonl /
// vocab.txt) or, for single-split commands, one .jsonl file.
fs::path split_path(const std::string& data, const char* split) {
  if (data.empty()) throw ConfigError("missing --data");
  fs::path p(data);
  if (fs::is_directory(p)) return p / (std::string(split) + ".jsonl");
  if (!fs::exists(p)) throw DataError("data path does not exist: " + data);
  return p;
}

fs::path vocab_path(const std::string& data) {
  fs::path p(data);
  if (fs::is_directory(p)) return p / "vocab.txt";
  return p.parent_path() / "vocab.txt";
}

struct LoadedSplit {
  std::vector<UserSample> samples;
  std::size_t vocab_size = 0;
};

LoadedSplit load_split(const RunConfig& cfg, const std::string& data, const char* split) {
  LoadedSplit out;
  Vocabulary vocab;
  const Vocabulary* vp = nullptr;
  if (cfg.encoder == PayloadKind::tokens) {
    vocab = Vocabulary::load(vocab_path(data).string());
    out.vocab_size = vocab.size();
    vp = &vocab;
  }
  out.samples = load_jsonl(split_path(data, split).string(), cfg.encoder, cfg.model.traits, vp,
                           cfg.load_options());
  return out;
}

int cmd_train(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg = resolve_config(sub, f);
  LoadedSplit train = load_split(cfg, f.data_path, "train");
  LoadedSplit val = load_split(cfg, f.data_path, "val");

  // Explicit --seed flags win; a seed in the config file runs alone; with
  // neither, train across the standard three seeds.
  std::vector<std::uint64_t> seeds = f.seeds;
  if (seeds.empty()) seeds = cfg.seed_from_file ? std::vector<std::uint64_t>{cfg.seed}
                                                : std::vector<std::uint64_t>{1, 2, 3};

  if (seeds.size() == 1) {
    cfg.seed = seeds[0];
    TrainArtifacts art = train_model(cfg, train.samples, val.samples, train.vocab_size, f.out_dir);
    std::cout << metrics_json(art.best_val) << "\n";
    return 0;
  }

  nlohmann::ordered_json summary;
  summary["per_seed"] = nlohmann::ordered_json::array();
  double sum = 0.0, best = -1.0;
  for (std::uint64_t seed : seeds) {
    cfg.seed = seed;
    const std::string run_dir = (fs::path(f.out_dir) / ("seed" + std::to_string(seed))).string();
    TrainArtifacts art = train_model(cfg, train.samples, val.samples, train.vocab_size, run_dir);
    std::cout << metrics_json(art.best_val) << "\n";
    nlohmann::ordered_json row;
    row["seed"] = seed;
    row["average"] = art.best_val.average;
    row["epoch"] = art.best_val.epoch;
    summary["per_seed"].push_back(row);
    sum += art.best_val.average;
    best = std::max(best, art.best_val.average);
  }
  summary["mean"] = sum / static_cast<double>(seeds.size());
  summary["max"] = best;
  std::ofstream(fs::path(f.out_dir) / "summary.json") << summary.dump() << "\n";
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg = resolve_config(sub, f);
  LoadedSplit test = load_split(cfg, f.data_path, "test");
  if (f.checkpoint.empty()) throw ConfigError("missing --checkpoint");
  ModelParams params = load_model(f.checkpoint, cfg.model,
                                  cfg.encoder == PayloadKind::tokens ? test.vocab_size : 0);
  MetricsReport report = evaluate_model(params, cfg.model, cfg.encoder, test.samples);
  report.seed = cfg.seed;
  std::cout << metrics_json(report) << "\n";
  return 0;
}

int cmd_sparsity(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg = resolve_config(sub, f);
  LoadedSplit test = load_split(cfg, f.data_path, "test");
  if (f.checkpoint.empty()) throw ConfigError("missing --checkpoint");
  ModelParams params = load_model(f.checkpoint, cfg.model,
                                  cfg.encoder == PayloadKind::tokens ? test.vocab_size : 0);
  std::cout << sparsity_csv(sparsity_snapshot(params, cfg.model, cfg.encoder, test.samples));
  return 0;
}

int cmd_gradcheck(const CLI::App* sub, const CommonFlags& f, std::size_t posts) {
  RunConfig cfg = resolve_config(sub, f);
  const std::uint64_t seed = f.seeds.empty() ? cfg.seed : f.seeds[0];
  FullCheckReport report = run_full_gradcheck(cfg.model, posts, seed);
  std::cout << (report.passed ? "PASS" : "FAIL") << " max rel err " << report.max_rel_err
            << " over " << report.entries << " entries after " << report.attempts
            << " attempt(s)\n"
            << report.detail << "\n";
  if (!report.passed) throw NumericError("gradient check failed");
  return 0;
}

int cmd_synth(const SynthConfig& synth, const std::string& out_dir) {
  synth_generate(synth, out_dir);
  Vocabulary vocab = Vocabulary::load((fs::path(out_dir) / "vocab.txt").string());
  auto test = load_jsonl((fs::path(out_dir) / "test.jsonl").string(), PayloadKind::tokens,
                         synth.traits, &vocab);
  std::cout << "wrote " << synth.train_users << "/" << synth.val_users << "/" << synth.test_users
            << " users to " << out_dir << "; signal-vote ceiling on test: "
            << signal_vote_macro_f1(test, vocab, synth.traits) << "\n";
  return 0;
}

int cmd_sweep_depth(const CLI::App* sub, const CommonFlags& f) {
  RunConfig cfg = resolve_config(sub, f);
  if (!f.seeds.empty()) cfg.seed = f.seeds[0];
  LoadedSplit train = load_split(cfg, f.data_path, "train");
  LoadedSplit val = load_split(cfg, f.data_path, "val");
  LoadedSplit test = load_split(cfg, f.data_path, "test");

  std::ostringstream csv;
  csv << "depth,val_average,test_average\n";
  csv.precision(17);
  for (std::size_t depth : depth_grid()) {
    cfg.model.depth = depth;
    const std::string run_dir = (fs::path(f.out_dir) / ("depth" + std::to_string(depth))).string();
    TrainArtifacts art = train_model(cfg, train.samples, val.samples, train.vocab_size, run_dir);
    ModelParams best = load_model(art.checkpoint_path, cfg.model,
                                  cfg.encoder == PayloadKind::tokens ? train.vocab_size : 0);
    MetricsReport test_report = evaluate_model(best, cfg.model, cfg.encoder, test.samples);
    csv << depth << "," << art.best_val.average << "," << test_report.average << "\n";
    std::cout << "depth " << depth << ": val " << art.best_val.average << ", test "
              << test_report.average << "\n";
  }
  std::ofstream(fs::path(f.out_dir) / "sweep.csv") << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic-graph multi-trait classifier"};
  app.require_subcommand(1);

  CommonFlags f;
  SynthConfig synth;
  std::size_t gradcheck_posts = 4;

  CLI::App* train = app.add_subcommand("train", "train a model and keep the best checkpoint");
  add_model_flags(train, f);
  train->add_option("--data", f.data_path, "corpus directory")->required();
  train->add_option("--out", f.out_dir, "artifact directory");
  train->add_option("--seed", f.seeds, "seed; repeat for a multi-seed run");

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on the test split");
  add_model_flags(eval, f);
  eval->add_option("--data", f.data_path, "corpus directory or .jsonl file")->required();
  eval->add_option("--checkpoint", f.checkpoint, "trained checkpoint")->required();
  eval->add_option("--seed", f.seeds, "seed recorded in the report");

  CLI::App* sparsity = app.add_subcommand("sparsity", "edge-count ratios of a checkpoint");
  add_model_flags(sparsity, f);
  sparsity->add_option("--data", f.data_path, "corpus directory or .jsonl file")->required();
  sparsity->add_option("--checkpoint", f.checkpoint, "trained checkpoint")->required();

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "compare every gradient against finite differences");
  add_model_flags(gradcheck, f);
  gradcheck->add_option("--posts", gradcheck_posts, "posts in the random fixture");
  gradcheck->add_option("--seed", f.seeds, "fixture seed");

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth_cmd->add_option("--out", f.out_dir, "output directory");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--train", synth.train_users, "training users");
  synth_cmd->add_option("--val", synth.val_users, "validation users");
  synth_cmd->add_option("--test", synth.test_users, "test users");
  synth_cmd->add_option("--posts", synth.posts_per_user, "posts per user");
  synth_cmd->add_option("--traits", synth.traits, "binary traits");
  synth_cmd->add_option("--vocab-size", synth.vocab_size, "vocabulary size");
  synth_cmd->add_option("--post-len", synth.post_len, "tokens per post");
  synth_cmd->add_option("--noise", synth.noise_ratio, "fraction of posts with no signal");
  synth_cmd->add_option("--positive-rate", synth.positive_rate, "per-trait label-1 probability");

  CLI::App* sweep = app.add_subcommand("sweep-depth", "train across the depth grid");
  add_model_flags(sweep, f);
  sweep->add_option("--data", f.data_path, "corpus directory")->required();
  sweep->add_option("--out", f.out_dir, "artifact directory");
  sweep->add_option("--seed", f.seeds, "seed for every depth");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(train, f);
    if (eval->parsed()) return cmd_eval(eval, f);
    if (sparsity->parsed()) return cmd_sparsity(sparsity, f);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck, f, gradcheck_posts);
    if (synth_cmd->parsed()) return cmd_synth(synth, f.out_dir);
    if (sweep->parsed()) return cmd_sweep_depth(sweep, f);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
