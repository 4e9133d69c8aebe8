/*
 * Copyright 2026 The quotecse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// quotecse: command line front end.
//
//   quotecse extract  --input raw.jsonl --output articles.jsonl
//   quotecse mine     --articles articles.jsonl --out-dir triplets/
//   quotecse train    --triplets triplets/ --output encoder.bin
//   quotecse evaluate --labeled labeled.jsonl --encoder encoder.bin
//   quotecse detect   --input labeled.jsonl --encoder encoder.bin --classifier clf.bin
//   quotecse synth    --out-dir data/
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
// error, 3 internal error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quotecse/config.hpp"
#include "quotecse/contrastive.hpp"
#include "quotecse/corpus.hpp"
#include "quotecse/detection.hpp"
#include "quotecse/encoder.hpp"
#include "quotecse/errors.hpp"
#include "quotecse/evaluation.hpp"
#include "quotecse/mining.hpp"
#include "quotecse/synthetic.hpp"
#include "quotecse/text.hpp"

namespace {

using namespace quotecse;
namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

// --config plus one flag per configuration key.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    for (const auto& k : config_keys())
      options[k] = sub->add_option("--" + k, values[k], "overrides configuration key '" + k + "'")->group("Configuration");
  }

  // Defaults, then the config file, then flags.
  RunConfig resolve() const {
    KeyValues kv;
    if (!config_path.empty()) kv = load_key_values(config_path);
    for (const auto& [k, opt] : options)
      if (opt->count() > 0) kv[k] = values.at(k);
    return apply_key_values(RunConfig{}, kv);
  }
};

struct Snapshot {
  json data;
  std::string hash;
};

Snapshot snapshot(const std::string& command, const RunConfig& cfg, json extra = json::object()) {
  json j;
  j["command"] = command;
  j["run"] = to_json(cfg);
  j["extra"] = std::move(extra);
  return {j, config_hash(j)};
}

void write_text(const std::string& path, const std::string& content) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

void write_meta(const std::string& artifact, const Snapshot& s) {
  json meta;
  meta["config_hash"] = s.hash;
  meta["config"] = s.data;
  write_text(artifact + ".meta.json", meta.dump(2) + "\n");
}

std::vector<DelimiterPair> parse_delimiters(const std::string& spec) {
  if (spec.empty()) return default_delimiters();
  const auto cps = text::decode_utf8(spec);
  if (cps.size() % 2 != 0) throw ConfigError({"--delimiters needs an even number of characters (open/close pairs)"});
  std::vector<DelimiterPair> out;
  for (std::size_t i = 0; i < cps.size(); i += 2) out.push_back({cps[i], cps[i + 1]});
  return out;
}

Encoder encoder_for(const std::string& checkpoint, const RunConfig& cfg) {
  return checkpoint.empty() ? Encoder::create(cfg.encoder) : Encoder::load(checkpoint);
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  if (spec.empty()) return default_eval_seeds();
  std::vector<std::uint64_t> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::uint64_t v = 0;
    if (!detail::parse_number(text::trim(std::string_view(item)), v)) throw ConfigError({"invalid seed '" + item + "'"});
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError({"--seeds is empty"});
  return out;
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::string s;
  for (const auto& r : records) s += r.dump() + "\n";
  write_text(path, s);
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string input, output, delimiters;
  ConfigOptions config;
};

int run_extract(const ExtractArgs& a) {
  const RunConfig cfg = a.config.resolve();
  const auto delims = parse_delimiters(a.delimiters);
  const auto articles = load_articles(a.input, delims);
  std::vector<json> out;
  std::size_t headline = 0, body = 0;
  for (const auto& art : articles) {
    headline += art.headline_quotes.size();
    body += art.body_quotes.size();
    out.push_back(article_to_json(art));
  }
  write_jsonl(a.output, out);
  write_meta(a.output, snapshot("extract", cfg, {{"delimiters", a.delimiters}}));
  std::cout << "articles " << articles.size() << "\nheadline_quotes " << headline << "\nbody_quotes " << body
            << "\nquotes " << headline + body << "\n";
  return kOk;
}

// ---------------------------------------------------------------- mine

struct MineArgs {
  std::string articles, out_dir, encoder;
  double threshold = kDefaultSimilarityThreshold;
  ConfigOptions config;
};

int run_mine(const MineArgs& a) {
  const RunConfig cfg = a.config.resolve();
  const auto articles = load_articles(a.articles);
  const Encoder enc = encoder_for(a.encoder, cfg);
  const auto r = mine_corpus(std::span<const Article>(articles), enc, a.threshold, cfg.train.seed);
  const Snapshot snap =
      snapshot("mine", cfg, {{"threshold", a.threshold}, {"encoder", enc.identifier()}, {"seed", cfg.train.seed}});
  const fs::path dir(a.out_dir);
  auto dump = [&](const char* name, const std::vector<TrainingItem>& items) {
    std::vector<json> recs;
    for (const auto& it : items) recs.push_back(triplet_to_json(it));
    const std::string path = (dir / name).string();
    write_jsonl(path, recs);
    write_meta(path, snap);
  };
  dump("train.jsonl", r.train);
  dump("val.jsonl", r.val);
  dump("test.jsonl", r.test);
  json stats = r.stats.to_json();
  stats["splits"] = {{"train", r.train.size()}, {"val", r.val.size()}, {"test", r.test.size()}};
  stats["config_hash"] = snap.hash;
  stats["config"] = snap.data;
  write_text((dir / "stats.json").string(), stats.dump(2) + "\n");
  std::cout << "articles " << r.stats.total << "\nkept " << r.stats.kept << "\ntrain " << r.train.size() << "\nval "
            << r.val.size() << "\ntest " << r.test.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string triplets, output, curve, init;
  ConfigOptions config;
};

int run_train(const TrainArgs& a) {
  const RunConfig cfg = a.config.resolve();
  const fs::path dir(a.triplets);
  const auto train_set = load_triplets((dir / "train.jsonl").string());
  std::vector<TrainingItem> val_set;
  if (fs::exists(dir / "val.jsonl")) val_set = load_triplets((dir / "val.jsonl").string());
  const Encoder init = encoder_for(a.init, cfg);
  const Snapshot snap = snapshot("train", cfg, {{"init", init.identifier()}});
  TrainResult res = train(std::span<const TrainingItem>(train_set), std::span<const TrainingItem>(val_set), init, cfg.train);
  res.encoder.set_tag(snap.hash);
  res.encoder.save(a.output);
  write_meta(a.output, snap);

  std::string csv = "step,train_loss,val_loss\n";
  for (const auto& p : res.curve)
    csv += std::to_string(p.step) + "," + text::format_double(p.train_loss) + "," +
           (p.val_loss ? text::format_double(*p.val_loss) : std::string()) + "\n";
  const std::string curve = a.curve.empty() ? a.output + ".loss.csv" : a.curve;
  write_text(curve, csv);
  write_meta(curve, snap);
  std::cout << "steps " << res.curve.size() << "\nbest_epoch "
            << (res.best_epoch ? std::to_string(*res.best_epoch) : std::string("none")) << "\nbest_val_loss "
            << text::format_double(res.best_val_loss) << "\nconfig_hash " << snap.hash << "\n";
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string labeled, encoder, seeds, output, save_classifier;
  ConfigOptions config;
};

int run_evaluate(const EvaluateArgs& a) {
  const RunConfig cfg = a.config.resolve();
  const auto seeds = parse_seeds(a.seeds);
  const auto load = load_detection_examples(a.labeled);
  const Encoder enc = encoder_for(a.encoder, cfg);
  const Snapshot snap = snapshot("evaluate", cfg, {{"encoder", enc.identifier()}, {"seeds", seeds}});
  const EvalReport report =
      repeated_split_eval(std::span<const DetectionExample>(load.examples), enc, cfg.classifier, seeds);
  json j = report.to_json();
  j["excluded_identical"] = load.excluded_identical;
  j["encoder"] = enc.identifier();
  j["config_hash"] = snap.hash;
  j["run_config"] = snap.data;
  const std::string body = j.dump(2) + "\n";
  if (a.output.empty()) {
    std::cout << body;
  } else {
    write_text(a.output, body);
    std::cout << "f1 " << text::format_double(report.metrics.at("f1").mean) << " +- "
              << text::format_double(report.metrics.at("f1").stderr_) << "\nauc "
              << text::format_double(report.metrics.at("auc").mean) << " +- "
              << text::format_double(report.metrics.at("auc").stderr_) << "\n";
  }
  if (!a.save_classifier.empty()) {
    std::vector<Vector> features;
    std::vector<int> labels;
    for (const auto& ex : load.examples) {
      features.push_back(example_features(ex, enc));
      labels.push_back(static_cast<int>(ex.label));
    }
    ClassifierConfig cc = cfg.classifier;
    cc.seed = cfg.train.seed;
    save_classifier(train_classifier(features, labels, cc), a.save_classifier);
    write_meta(a.save_classifier, snap);
  }
  return kOk;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::string input, encoder, classifier, output, pk_csv;
  ConfigOptions config;
};

int run_detect(const DetectArgs& a) {
  const RunConfig cfg = a.config.resolve();
  const Encoder enc = encoder_for(a.encoder, cfg);
  const ClassifierParams params = load_classifier(a.classifier);
  if (params.input_dim != 4 * enc.dim())
    throw DataError("classifier expects " + std::to_string(params.input_dim) + " features but the encoder gives " +
                    std::to_string(4 * enc.dim()));
  const auto delims = default_delimiters();
  std::vector<json> out;
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t skipped = 0;
  for_each_line(a.input, [&](const std::string& line, std::size_t n) {
    auto in = parse_detection_input(line, delims, n);
    if (!in) {
      ++skipped;
      return;
    }
    const Detection d = detect(in->example, enc, params);
    out.push_back(detection_to_json(in->example.article_id, d));
    if (in->labeled) {
      scores.push_back(d.probability);
      labels.push_back(static_cast<int>(in->example.label));
    }
  });
  const Snapshot snap = snapshot("detect", cfg, {{"encoder", enc.identifier()}});
  if (a.output.empty()) {
    for (const auto& r : out) std::cout << r.dump() << "\n";
  } else {
    write_jsonl(a.output, out);
    write_meta(a.output, snap);
  }
  if (!a.pk_csv.empty()) {
    if (scores.empty()) throw DataError("--pk-csv needs labeled input records");
    const auto curve = precision_at_k_curve(scores, labels, scores.size());
    std::string csv = "k,precision\n";
    for (std::size_t k = 0; k < curve.size(); ++k) csv += std::to_string(k + 1) + "," + text::format_double(curve[k]) + "\n";
    write_text(a.pk_csv, csv);
    write_meta(a.pk_csv, snap);
  }
  std::cerr << "predictions " << out.size() << " skipped " << skipped << "\n";
  return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out_dir;
  std::size_t unlabeled = 4000;
  std::size_t labeled = 1000;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  const synthetic::Generator gen(synthetic::Config{});
  const fs::path dir(a.out_dir);
  std::vector<json> arts;
  for (const auto& art : gen.unlabeled(a.unlabeled, a.seed))
    arts.push_back({{"id", art.id}, {"title", art.title}, {"body", art.body}});
  write_jsonl((dir / "articles.jsonl").string(), arts);
  std::vector<json> ex;
  for (const auto& e : gen.labeled(a.labeled, a.seed)) ex.push_back(example_to_json(e));
  write_jsonl((dir / "labeled.jsonl").string(), ex);
  std::cout << "articles " << arts.size() << "\nlabeled " << ex.size() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextomized quote detection: quote mining, contrastive training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "quotecse 0.1.0");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Annotate articles with their headline and body quotes");
  extract->add_option("--input", ex.input, "Article JSONL")->required();
  extract->add_option("--output", ex.output, "Annotated article JSONL")->required();
  extract->add_option("--delimiters", ex.delimiters, "Open/close mark pairs, e.g. '\"\"“”' (default: \"\" “” 『』 「」)");
  ex.config.attach(extract);

  MineArgs mi;
  auto* mine = app.add_subcommand("mine", "Mine anchor/positive/negative triplets and split them 80/10/10");
  mine->add_option("--articles", mi.articles, "Article JSONL")->required();
  mine->add_option("--out-dir", mi.out_dir, "Directory for train/val/test.jsonl and stats.json")->required();
  mine->add_option("--encoder", mi.encoder, "Encoder checkpoint used for assignment (default: untrained toy encoder)");
  mine->add_option("--threshold", mi.threshold, "Minimum anchor-positive cosine similarity")->capture_default_str();
  mi.config.attach(mine);

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train the projection head with a contrastive objective");
  trn->add_option("--triplets", tr.triplets, "Directory holding train.jsonl and optionally val.jsonl")->required();
  trn->add_option("--output", tr.output, "Encoder checkpoint to write")->required();
  trn->add_option("--curve", tr.curve, "Loss curve CSV (default: <output>.loss.csv)");
  trn->add_option("--init", tr.init, "Start from this encoder checkpoint instead of a fresh one");
  tr.config.attach(trn);

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Repeated 8:2 split detection evaluation (F1, AUC)");
  eval->add_option("--labeled", ev.labeled, "Labeled example JSONL")->required();
  eval->add_option("--encoder", ev.encoder, "Encoder checkpoint (default: untrained toy encoder)");
  eval->add_option("--seeds", ev.seeds, "Comma-separated split seeds (default: 0,10,...,140)");
  eval->add_option("--output", ev.output, "Report JSON (default: stdout)");
  eval->add_option("--save-classifier", ev.save_classifier, "Also fit the detector on all examples and save it");
  ev.config.attach(eval);

  DetectArgs de;
  auto* det = app.add_subcommand("detect", "Label headline quotes as contextomized (1) or modified (0)");
  det->add_option("--input", de.input, "Example or article JSONL")->required();
  det->add_option("--encoder", de.encoder, "Encoder checkpoint (default: untrained toy encoder)");
  det->add_option("--classifier", de.classifier, "Classifier checkpoint from evaluate --save-classifier")->required();
  det->add_option("--output", de.output, "Prediction JSONL (default: stdout)");
  det->add_option("--pk-csv", de.pk_csv, "precision@k curve CSV over labeled input records");
  de.config.attach(det);

  SynthArgs sy;
  auto* syn = app.add_subcommand("synth", "Write a synthetic article corpus and labeled set");
  syn->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  syn->add_option("--unlabeled", sy.unlabeled, "Number of unlabeled articles")->capture_default_str();
  syn->add_option("--labeled", sy.labeled, "Number of labeled examples")->capture_default_str();
  syn->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*extract) return run_extract(ex);
    if (*mine) return run_mine(mi);
    if (*trn) return run_train(tr);
    if (*eval) return run_evaluate(ev);
    if (*det) return run_detect(de);
    if (*syn) return run_synth(sy);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
