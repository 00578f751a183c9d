#include "dcoh/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dcoh/analysis.hpp"
#include "dcoh/common.hpp"
#include "dcoh/corpus.hpp"
#include "dcoh/grid.hpp"
#include "dcoh/metrics.hpp"
#include "dcoh/models.hpp"
#include "dcoh/swapgen.hpp"

namespace dcoh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string path_in(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

// Only the section of the command that ran, so the file can be passed back
// through --config.
void write_resolved_config(const CLI::App& root, const std::string& dir) {
  for (const auto* sub : root.get_subcommands())
    write_file(path_in(dir, "resolved_config.toml"),
               "[" + sub->get_name() + "]\n" + sub->config_to_str(true, false));
}

std::vector<std::string> parse_id_list(const std::string& path) {
  std::vector<std::string> ids;
  for (auto& line : split_lines(read_file(path)))
    if (line.find_first_not_of(" \t") != std::string::npos) ids.push_back(line);
  return ids;
}

std::unique_ptr<Tagset> maybe_tagset(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_unique<Tagset>(Tagset::load(path));
}

// ------------------------------------------------------------ commands

struct ValidateArgs {
  std::string corpus, tagset;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const auto tags = maybe_tagset(a.tagset);
  const auto lines = split_lines(read_file(a.corpus));
  std::size_t dialogues = 0, problems = 0;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    const auto at = a.corpus + ":" + std::to_string(i + 1) + ": ";
    try {
      const auto d = dialogue_from_json(json::parse(lines[i]));
      ++dialogues;
      for (const auto& v : validate_dialogue(d, tags.get())) {
        out << at << v.where << ": " << v.message << '\n';
        ++problems;
      }
      if (!ids.insert(d.id).second) {
        out << at << "duplicate dialogue id '" << d.id << "'\n";
        ++problems;
      }
    } catch (const json::exception& e) {
      out << at << "parse error: " << e.what() << '\n';
      ++problems;
    } catch (const DataError& e) {
      out << at << e.what() << '\n';
      ++problems;
    }
  }
  if (dialogues == 0 && problems == 0) {
    out << a.corpus << ": empty corpus\n";
    return kExitData;
  }
  out << dialogues << " dialogues, " << problems << " problems\n";
  return problems ? kExitData : kExitOk;
}

struct VocabArgs {
  std::string corpus, tagset, out;
  std::size_t min_count = 1;
};

int cmd_vocab(const VocabArgs& a, const CLI::App& root, std::ostream& out) {
  const auto tags = maybe_tagset(a.tagset);
  const auto corpus = load_corpus(a.corpus, tags.get());
  const auto v = derive_vocabularies(corpus, a.min_count, tags.get());
  ensure_dir(a.out);
  write_file(path_in(a.out, "vocab.json"), to_json(v).dump(2) + "\n");
  write_resolved_config(root, a.out);
  out << "words " << v.words.size() << ", roles " << v.roles.size() << ", das "
      << v.das.size() << ", das_iob " << v.das_iob.size() << ", turns " << v.turns.size()
      << '\n';
  return kExitOk;
}

struct FeaturesArgs {
  std::string corpus, tagset, out, kind = "joint";
  std::size_t length = 2, saliency = 1;
};

int cmd_features(const FeaturesArgs& a, const CLI::App& root, std::ostream& out) {
  const auto tags = maybe_tagset(a.tagset);
  const auto corpus = load_corpus(a.corpus, tags.get());
  const auto v = derive_vocabularies(corpus, 1, tags.get());
  TransitionConfig tc{a.length, a.saliency};
  tc.check();
  ensure_dir(a.out);
  write_file(path_in(a.out, "features.tsv"),
             features_tsv(corpus, parse_grid_features(a.kind), tc, v.das));
  write_resolved_config(root, a.out);
  out << "wrote " << corpus.size() << " rows\n";
  return kExitOk;
}

struct GenArgs {
  std::string corpus, split, mode = "external", out;
  std::size_t points = 10, negatives = 9, ctx_min = 1, ctx_max = 0;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a, const CLI::App& root, std::ostream& out) {
  auto corpus = load_corpus(a.corpus);
  if (!a.split.empty()) corpus = select_split(corpus, parse_id_list(a.split));
  SelectionConfig cfg;
  cfg.points_per_dialogue = a.points;
  cfg.seed = a.seed;
  cfg.context.min = a.ctx_min;
  if (a.ctx_max) cfg.context.max = a.ctx_max;
  if (a.mode == "internal") {
    cfg.internal_negatives = a.negatives;
    cfg.external_negatives = 0;
  } else if (a.mode == "external") {
    cfg.internal_negatives = 0;
    cfg.external_negatives = a.negatives;
  } else {  // mixed
    if (a.negatives % 2) throw std::invalid_argument("--mode mixed needs an even --negatives");
    cfg.internal_negatives = cfg.external_negatives = a.negatives / 2;
  }
  const auto ds = build_selection_dataset(corpus, cfg);
  ensure_dir(a.out);
  const auto body = serialize_instances(ds.instances);
  auto manifest = ds.manifest;
  manifest["dataset_checksum"] = hex64(fnv1a64(body));
  write_file(path_in(a.out, "dataset.jsonl"), body);
  write_file(path_in(a.out, "manifest.json"), manifest.dump(2) + "\n");
  write_resolved_config(root, a.out);
  out << "instances " << ds.instances.size() << ", pairs " << ds.pairs() << ", skipped "
      << ds.skipped.size() << ", checksum " << manifest["dataset_checksum"].get<std::string>()
      << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string model = "neural", train, dev, out, tagset, channels = "da,turn", word_vectors;
  std::uint64_t seed = 0;
  NeuralConfig neural;
  std::size_t min_count = 1;
  std::string features = "joint";
  std::size_t length = 2, saliency = 1, linear_epochs = 20;
  double l2 = 0.5;
};

int cmd_train(TrainArgs a, const CLI::App& root, std::ostream& out) {
  const auto train = load_instances(a.train);
  std::vector<RankingInstance> dev;
  if (!a.dev.empty()) dev = load_instances(a.dev);
  const auto tags = maybe_tagset(a.tagset);
  ensure_dir(a.out);
  const auto ckpt_path = path_in(a.out, "model.ckpt");
  json manifest = {{"seed", a.seed}, {"train", a.train}, {"dev", a.dev},
                   {"train_instances", train.size()}, {"dev_instances", dev.size()}};

  if (a.model == "neural") {
    if (dev.empty()) throw DataError("neural training needs --dev");
    a.neural.channels = Channels::parse(a.channels);
    a.neural.seed = a.seed;
    const auto vocab = derive_training_vocab(train, dev, a.min_count, tags.get());
    std::optional<WordVectors> vectors;
    if (!a.word_vectors.empty()) {
      vectors = parse_word_vectors(read_file(a.word_vectors));
      manifest["word_vectors"] = a.word_vectors;
    }
    auto res = train_neural(train, dev, a.neural, vocab, vectors ? &*vectors : nullptr);
    manifest["epochs_run"] = res.history.epochs.size();
    manifest["best_epoch"] = res.history.best_epoch;
    manifest["best_dev_mrr"] = res.history.best_dev_mrr;
    manifest["history"] = to_json(res.history);
    save_checkpoint(make_checkpoint(res.model, manifest), ckpt_path);
    write_file(path_in(a.out, "history.json"), to_json(res.history).dump(2) + "\n");
    out << "epochs " << res.history.epochs.size() << ", best epoch " << res.history.best_epoch
        << ", best dev MRR " << res.history.best_dev_mrr << '\n';
  } else if (a.model == "linear") {
    LinearConfig lc;
    lc.features = parse_grid_features(a.features);
    lc.transitions = {a.length, a.saliency};
    lc.l2 = a.l2;
    lc.epochs = a.linear_epochs;
    lc.seed = a.seed;
    const auto vocab = derive_training_vocab(train, dev, a.min_count, tags.get());
    const auto model = train_linear_model(train, vocab.das, lc);
    if (!dev.empty()) {
      const auto m = evaluate_selection(model, dev);
      manifest["dev_mrr"] = m.mrr;
      manifest["dev_accuracy"] = m.accuracy;
      out << "dev MRR " << m.mrr << ", dev accuracy " << m.accuracy << '\n';
    }
    save_checkpoint(make_checkpoint(model, manifest), ckpt_path);
  } else {
    throw std::invalid_argument("--model must be neural or linear");
  }
  write_resolved_config(root, a.out);
  out << "checkpoint " << ckpt_path << " "
      << hex64(fnv1a64(read_file(ckpt_path))) << '\n';
  return kExitOk;
}

void write_metrics(const std::vector<MetricSummary>& m, const std::string& dir,
                   const CLI::App& root, std::ostream& out) {
  ensure_dir(dir);
  write_file(path_in(dir, "metrics.json"), metrics_json(m).dump(2) + "\n");
  write_file(path_in(dir, "metrics.tsv"), metrics_tsv(m));
  write_resolved_config(root, dir);
  out << metrics_tsv(m);
}

struct EvalArgs {
  std::vector<std::string> models;
  std::string data, out, gain = "linear";
  bool strict = false;
};

int cmd_eval_selection(const EvalArgs& a, const CLI::App& root, std::ostream& out) {
  const auto data = load_instances(a.data);
  std::vector<MetricSummary> m{{"accuracy", {}, 0}, {"mrr", {}, 0}, {"r1", {}, 0}, {"r2", {}, 0}};
  for (const auto& path : a.models) {
    const auto model = model_from_checkpoint(load_checkpoint(path));
    const auto r = evaluate_selection(*model, data);
    m[0].per_run.push_back(r.accuracy);
    m[1].per_run.push_back(r.mrr);
    m[2].per_run.push_back(r.r1);
    m[3].per_run.push_back(r.r2);
    for (auto& s : m) s.instances = r.instances;
  }
  write_metrics(m, a.out, root, out);
  return kExitOk;
}

int cmd_eval_rating(const EvalArgs& a, const CLI::App& root, std::ostream& out) {
  const auto data = load_rated_testset(a.data, a.strict);
  std::vector<MetricSummary> m{{"accuracy", {}, 0}, {"mrr", {}, 0}, {"r1", {}, 0}, {"ndcg", {}, 0}};
  for (const auto& path : a.models) {
    const auto model = model_from_checkpoint(load_checkpoint(path));
    const auto r = evaluate_rating(*model, data, parse_gain_mode(a.gain));
    m[0].per_run.push_back(r.accuracy);
    m[1].per_run.push_back(r.mrr);
    m[2].per_run.push_back(r.r1);
    m[3].per_run.push_back(r.ndcg);
    for (auto& s : m) s.instances = r.instances;
  }
  write_metrics(m, a.out, root, out);
  return kExitOk;
}

struct RateArgs {
  std::string model, input;
};

// Input: {"context": [turn], "candidates": [turn | {"turn": turn,
// "provenance"?: str, "mean_rating"?: real, "ratings"?: [int]}]}
int cmd_rate(const RateArgs& a, std::ostream& out) {
  const auto model = model_from_checkpoint(load_checkpoint(a.model));
  json in;
  try {
    in = json::parse(read_file(a.input));
  } catch (const json::exception& e) {
    throw DataError(a.input + ": parse error: " + e.what());
  }
  std::vector<Turn> context, cands;
  std::vector<std::string> labels;
  std::vector<std::optional<double>> ratings;
  try {
    for (const auto& t : in.at("context")) context.push_back(turn_from_json(t));
    for (const auto& c : in.at("candidates")) {
      if (c.contains("turn")) {
        cands.push_back(turn_from_json(c.at("turn")));
        labels.push_back(c.value("provenance", std::string("-")));
        if (c.contains("mean_rating")) ratings.push_back(c.at("mean_rating").get<double>());
        else if (c.contains("ratings")) {
          const auto v = c.at("ratings").get<std::vector<int>>();
          double s = 0;
          for (int x : v) s += x;
          ratings.push_back(v.empty() ? std::optional<double>{} : s / static_cast<double>(v.size()));
        } else {
          ratings.push_back(std::nullopt);
        }
      } else {
        cands.push_back(turn_from_json(c));
        labels.push_back("-");
        ratings.push_back(std::nullopt);
      }
    }
  } catch (const json::exception& e) {
    throw DataError(a.input + ": " + e.what());
  }
  if (context.empty() || cands.empty())
    throw DataError(a.input + ": need a nonempty context and candidate list");
  const auto ranked = rank_candidates(context, cands, *model);
  std::vector<std::size_t> rank_of(cands.size());
  std::vector<double> score_of(cands.size());
  for (const auto& r : ranked) {
    rank_of[r.index] = r.rank;
    score_of[r.index] = r.score;
  }
  out << "candidate\tprovenance\tmean_rating\tscore\trank\tentities\n";
  out << std::setprecision(6);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::string ents;
    for (const auto& s : cands[i].segments)
      for (const auto& m : s.entities) ents += (ents.empty() ? "" : ",") + m.head;
    out << i << '\t' << labels[i] << '\t';
    if (ratings[i]) out << *ratings[i];
    else out << '-';
    out << '\t' << score_of[i] << '\t' << rank_of[i] << '\t' << (ents.empty() ? "-" : ents)
        << '\n';
  }
  return kExitOk;
}

struct AnalyzeArgs {
  std::string data, tagset, out;
  bool strict = false;
};

int cmd_analyze(const AnalyzeArgs& a, const CLI::App& root, std::ostream& out) {
  const auto data = load_rated_testset(a.data, a.strict);
  Tagset tags;
  if (!a.tagset.empty()) {
    tags = Tagset::load(a.tagset);
  } else {
    std::set<std::string> labels;
    for (const auto& r : data)
      for (const auto& c : r.candidates)
        for (const auto& s : c.turn.segments) labels.insert(s.da);
    tags.labels.assign(labels.begin(), labels.end());
  }
  const auto fits = mcc_report(data, tags);
  const auto stats = group_stats(data);
  ensure_dir(a.out);
  write_file(path_in(a.out, "coefficients.tsv"), coefficients_tsv(fits));
  json summary = {{"regression", mcc_summary_json(fits)}, {"groups", group_stats_json(stats)}};
  write_file(path_in(a.out, "summary.json"), summary.dump(2) + "\n");
  write_resolved_config(root, a.out);
  out << "group\tR2\tadjR2\n" << std::setprecision(4);
  for (const auto& f : fits)
    out << to_string(f.group) << '\t' << f.fit.r2 << '\t' << f.fit.adj_r2 << '\n';
  for (const auto& [p, s] : stats)
    out << to_string(p) << "\tmean " << s.mean << "\tsd " << s.sd << "\tn " << s.count << '\n';
  return kExitOk;
}

struct AgreementArgs {
  std::string ratings;
  int min_category = 1, max_category = 3;
};

// Input: {"items": [[rating|null per rater], ...]}
int cmd_agreement(const AgreementArgs& a, std::ostream& out) {
  RatingMatrix m;
  try {
    const auto j = json::parse(read_file(a.ratings));
    for (const auto& row : j.at("items")) {
      std::vector<std::optional<int>> r;
      for (const auto& x : row) {
        if (x.is_null()) r.push_back(std::nullopt);
        else r.push_back(x.get<int>());
      }
      m.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(a.ratings + ": " + e.what());
  }
  if (m.empty()) throw DataError(a.ratings + ": no items");
  const auto loo = leave_one_out_correlation(m);
  const std::size_t raters = m.front().size();
  json kappas = json::array();
  double ksum = 0;
  std::size_t kn = 0;
  for (std::size_t i = 0; i < raters; ++i)
    for (std::size_t j = i + 1; j < raters; ++j) {
      std::vector<int> x, y;
      for (const auto& row : m)
        if (row[i] && row[j]) {
          x.push_back(*row[i]);
          y.push_back(*row[j]);
        }
      if (x.empty()) continue;
      const double k = quadratic_weighted_kappa(x, y, a.min_category, a.max_category);
      kappas.push_back({{"a", i}, {"b", j}, {"kappa", k}, {"items", x.size()}});
      ksum += k;
      ++kn;
    }
  json res = {{"leave_one_out", {{"per_rater", loo.per_rater}, {"mean", loo.mean}}},
              {"pairwise_kappa", kappas},
              {"mean_kappa", kn ? json(ksum / static_cast<double>(kn)) : json(nullptr)}};
  out << res.dump(2) << '\n';
  return kExitOk;
}

struct BaselineArgs {
  std::size_t candidates = 10, relevant = 1, trials = 100000;
  std::string metric = "mrr", gains;
  std::uint64_t seed = 0;
};

int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  std::vector<double> rel;
  if (!a.gains.empty()) {
    std::stringstream ss(a.gains);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        rel.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument("--gains: bad number '" + tok + "'");
      }
    }
  } else {
    if (a.relevant < 1 || a.relevant > a.candidates)
      throw std::invalid_argument("--relevant must be in [1, --candidates]");
    rel.assign(a.candidates, 0.0);
    for (std::size_t i = 0; i < a.relevant; ++i) rel[i] = 1.0;
  }
  const auto est = random_baseline(rel, parse_baseline_metric(a.metric), a.trials, a.seed);
  json res = {{"metric", a.metric},
              {"candidates", rel.size()},
              {"trials", est.trials},
              {"mean", est.mean},
              {"std_error", est.std_error},
              {"closed_form", est.closed_form ? json(*est.closed_form) : json(nullptr)}};
  out << res.dump() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue coherence toolkit: entity/DA grids, swap datasets, rankers, metrics"};
  app.set_config("--config", "", "TOML/INI config file with one section per command")
      ->envname(kConfigEnv);
  app.require_subcommand(1);
  app.fallthrough();  // lets --config follow the subcommand

  // Checked after parsing: CLI11's own required() runs before config values
  // are applied to subcommands.
  std::vector<std::pair<const CLI::App*, const CLI::Option*>> required_opts;
  auto required = [&](const CLI::App* sub, CLI::Option* o) { required_opts.emplace_back(sub, o); };

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check corpus invariants");
  required(validate, validate->add_option("--corpus", va.corpus, "JSONL corpus"));
  validate->add_option("--tagset", va.tagset, "DA tagset file");

  VocabArgs vo;
  auto* vocab = app.add_subcommand("vocab", "Derive and save vocabularies");
  required(vocab, vocab->add_option("--corpus", vo.corpus));
  vocab->add_option("--tagset", vo.tagset);
  vocab->add_option("--min-count", vo.min_count, "Minimum head count for the word vocabulary")
      ->capture_default_str();
  required(vocab, vocab->add_option("--out", vo.out));

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "Export grid transition features as TSV");
  required(features, features->add_option("--corpus", fa.corpus));
  features->add_option("--tagset", fa.tagset);
  features->add_option("--kind", fa.kind, "entity|da|joint")
      ->check(CLI::IsMember({"entity", "da", "joint"}))
      ->capture_default_str();
  features->add_option("--length", fa.length, "Transition length")->capture_default_str();
  features->add_option("--saliency", fa.saliency)->capture_default_str();
  required(features, features->add_option("--out", fa.out));

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-dataset", "Generate a response-selection dataset");
  required(gen, gen->add_option("--corpus", ga.corpus));
  gen->add_option("--split", ga.split, "File listing dialogue ids of the split");
  gen->add_option("--mode", ga.mode, "internal|external|mixed")
      ->check(CLI::IsMember({"internal", "external", "mixed"}))
      ->capture_default_str();
  gen->add_option("--points", ga.points, "Insertion points per dialogue")->capture_default_str();
  gen->add_option("--negatives", ga.negatives, "Negatives per insertion point")
      ->capture_default_str();
  gen->add_option("--ctx-min", ga.ctx_min, "Minimum context length")->capture_default_str();
  gen->add_option("--ctx-max", ga.ctx_max, "Maximum context length (0 = unbounded)")
      ->capture_default_str();
  gen->add_option("--seed", ga.seed)->capture_default_str();
  required(gen, gen->add_option("--out", ga.out));

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a neural or linear coherence ranker");
  train->add_option("--model", ta.model, "neural|linear")
      ->check(CLI::IsMember({"neural", "linear"}))
      ->capture_default_str();
  required(train, train->add_option("--train", ta.train, "Training dataset JSONL"));
  train->add_option("--dev", ta.dev, "Development dataset JSONL");
  required(train, train->add_option("--out", ta.out));
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--tagset", ta.tagset);
  train->add_option("--min-count", ta.min_count)->capture_default_str();
  train->add_option("--channels", ta.channels, "Comma list of word,role,da,turn (or all)")
      ->capture_default_str();
  train->add_option("--emb-word", ta.neural.emb_dim_word)->capture_default_str();
  train->add_option("--emb-other", ta.neural.emb_dim_other)->capture_default_str();
  train->add_option("--layers", ta.neural.gru_layers)->capture_default_str();
  train->add_option("--hidden", ta.neural.gru_hidden, "GRU size per direction")
      ->capture_default_str();
  train->add_option("--head-hidden", ta.neural.head_hidden)->capture_default_str();
  train->add_option("--lr", ta.neural.lr)->capture_default_str();
  train->add_option("--batch", ta.neural.batch)->capture_default_str();
  train->add_option("--epochs", ta.neural.max_epochs)->capture_default_str();
  train->add_option("--patience", ta.neural.patience)->capture_default_str();
  train->add_option("--margin", ta.neural.margin)->capture_default_str();
  train->add_option("--features", ta.features, "Linear model features: entity|da|joint")
      ->check(CLI::IsMember({"entity", "da", "joint"}))
      ->capture_default_str();
  train->add_option("--length", ta.length, "Transition length")->capture_default_str();
  train->add_option("--saliency", ta.saliency)->capture_default_str();
  train->add_option("--l2", ta.l2)->capture_default_str();
  train->add_option("--word-vectors", ta.word_vectors,
                    "Text word vectors to initialize the word embedding");
  train->add_option("--linear-epochs", ta.linear_epochs)->capture_default_str();

  EvalArgs es;
  auto* eval_sel = app.add_subcommand("eval-selection", "Accuracy/MRR/R@1/R@2 on a dataset");
  required(eval_sel, eval_sel->add_option("--model", es.models, "Checkpoint(s); metrics are averaged"));
  required(eval_sel, eval_sel->add_option("--data", es.data));
  required(eval_sel, eval_sel->add_option("--out", es.out));

  EvalArgs er;
  auto* eval_rat = app.add_subcommand("eval-rating", "Accuracy/MRR/R@1/nDCG on a rated set");
  required(eval_rat, eval_rat->add_option("--model", er.models));
  required(eval_rat, eval_rat->add_option("--data", er.data));
  required(eval_rat, eval_rat->add_option("--out", er.out));
  eval_rat->add_flag("--strict", er.strict, "Require 7 candidates per instance");
  eval_rat->add_option("--gain", er.gain, "nDCG gain: linear|exponential")
      ->check(CLI::IsMember({"linear", "exponential"}))
      ->capture_default_str();

  RateArgs ra;
  auto* rate = app.add_subcommand("rate", "Score and rank candidates for one context");
  required(rate, rate->add_option("--model", ra.model));
  required(rate, rate->add_option("--input", ra.input, "JSON with context and candidates"));

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Regression analysis and group statistics");
  required(analyze, analyze->add_option("--data", aa.data, "Rated test set JSONL"));
  analyze->add_option("--tagset", aa.tagset);
  required(analyze, analyze->add_option("--out", aa.out));
  analyze->add_flag("--strict", aa.strict);

  AgreementArgs ag;
  auto* agreement = app.add_subcommand("agreement", "Weighted kappa and leave-one-out correlation");
  required(agreement, agreement->add_option("--ratings", ag.ratings, "JSON {\"items\": [[...], ...]}"));
  agreement->add_option("--min-category", ag.min_category)->capture_default_str();
  agreement->add_option("--max-category", ag.max_category)->capture_default_str();

  BaselineArgs ba;
  auto* baseline = app.add_subcommand("baseline", "Random-ranking baseline estimates");
  baseline->add_option("--candidates", ba.candidates)->capture_default_str();
  baseline->add_option("--relevant", ba.relevant)->capture_default_str();
  baseline->add_option("--metric", ba.metric, "accuracy|mrr|r1|r2|ndcg")
      ->check(CLI::IsMember({"accuracy", "mrr", "r1", "r2", "ndcg"}))
      ->capture_default_str();
  baseline->add_option("--gains", ba.gains, "Comma list of per-candidate gains/relevance");
  baseline->add_option("--trials", ba.trials)->capture_default_str();
  baseline->add_option("--seed", ba.seed)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (const auto& [sub, o] : required_opts)
      if (sub->parsed() && o->count() == 0)
        throw CLI::RequiredError(o->get_name());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(va, out);
    if (vocab->parsed()) return cmd_vocab(vo, app, out);
    if (features->parsed()) return cmd_features(fa, app, out);
    if (gen->parsed()) return cmd_gen(ga, app, out);
    if (train->parsed()) return cmd_train(ta, app, out);
    if (eval_sel->parsed()) return cmd_eval_selection(es, app, out);
    if (eval_rat->parsed()) return cmd_eval_rating(er, app, out);
    if (rate->parsed()) return cmd_rate(ra, out);
    if (analyze->parsed()) return cmd_analyze(aa, app, out);
    if (agreement->parsed()) return cmd_agreement(ag, out);
    if (baseline->parsed()) return cmd_baseline(ba, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dcoh
