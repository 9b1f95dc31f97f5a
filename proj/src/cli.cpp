#include "etcbound/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "etcbound/caption_client.hpp"
#include "etcbound/evalkit.hpp"
#include "etcbound/expand.hpp"
#include "etcbound/io.hpp"
#include "etcbound/matchers.hpp"
#include "etcbound/synthbench.hpp"
#include "etcbound/trainer.hpp"

namespace etcbound::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out = ".";
  std::size_t threads = 1;
};

struct GenDataOpts {
  synth::SynthConfig synth;
  std::size_t n_train = 500;
};

struct BuildDictOpts {
  std::vector<std::string> datasets;
  std::string truth;
  std::string caption_endpoint;
  std::string replay;
  std::size_t n_p = 5;
  std::size_t n_f = 5;
  std::size_t max_in_flight = 4;
  std::string output = "dict.jsonl";
};

struct ScoreOpts {
  std::string dataset;
  std::string dict;
  std::string aggregation = "max";
  std::string output = "scores.jsonl";
};

struct TrainOpts {
  std::string dataset;
  std::string dict;
  std::string validation;
  std::string ablation = "full";
  std::string preset = "activitynet";
  train::TrainConfig cfg;
  std::optional<double> alpha, beta;
  std::optional<std::size_t> warmup_epochs;
  std::string aggregation = "max";
  std::string inference = "p_o";
  std::string description_sampling = "per_step";
  std::string resume;
};

struct EvalOpts {
  std::string dataset;
  std::string run;
  std::string dict;
  std::string label;
  std::vector<double> thresholds = eval::kActivityNetThresholds;
  std::size_t bins = 10;
  bool force = false;
};

struct OracleOpts {
  std::string scores;
  std::size_t count = 100;
  std::size_t frames = 64;
  std::size_t grid = 128;
  double tau = 0.25;
  double delta = 0.15;
};

struct ReportOpts {
  std::vector<std::string> runs;
};

// Thrown for contract failures that should surface as exit code 3.
void require(bool cond, const std::string& message) {
  if (!cond) throw DataError(message);
}

fs::path out_path(const Common& c, const std::string& name) { return fs::path(c.out) / name; }

std::string hex_hash(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

int cmd_gen_data(const Common& c, GenDataOpts o) {
  o.synth.seed = c.seed;
  if (o.n_train > o.synth.n_instances) throw ConfigError("--n-train exceeds --n-instances");
  const auto out = synth::generate_dataset(o.synth);
  auto [train_set, test_set] = synth::split(out.dataset, o.n_train);
  io::write_dataset(out_path(c, "train.jsonl"), train_set);
  io::write_dataset(out_path(c, "test.jsonl"), test_set);
  auto truth = out.truth_json(*out.dataset.meta);
  truth["config"] = o.synth.to_json();
  io::write_json(out_path(c, "truth.json"), truth);
  std::cout << "wrote " << train_set.size() << " train and " << test_set.size() << " test instances to "
            << c.out << " (config " << o.synth.hash() << ")\n";
  return 0;
}

int cmd_build_dict(const Common& c, const BuildDictOpts& o) {
  const int sources = !o.truth.empty() + !o.caption_endpoint.empty() + !o.replay.empty();
  if (sources != 1) throw ConfigError("choose exactly one of --truth, --caption-endpoint, --replay");
  std::vector<Dataset> datasets;
  for (const auto& p : o.datasets) datasets.push_back(io::read_dataset(p));
  std::vector<const Dataset*> ptrs;
  for (const auto& d : datasets) ptrs.push_back(&d);

  expand::ExpansionConfig cfg;
  cfg.n_p = o.n_p;
  cfg.n_f = o.n_f;
  cfg.rng_seed = c.seed;
  cfg.max_in_flight = o.max_in_flight;

  std::unique_ptr<expand::CaptionProvider> provider;
  std::string source;
  if (!o.truth.empty()) {
    const auto truth = io::read_json(o.truth);
    double dropout = 0.0;
    if (truth.contains("config")) dropout = truth["config"].value("description_dropout", 0.0);
    provider = std::make_unique<expand::EchoCaptionProvider>(synth::frame_tokens_from_truth_json(truth), dropout,
                                                             derive_seed(c.seed, "captions"));
    source = "echo:" + hex_hash(truth.dump());
  } else if (!o.caption_endpoint.empty()) {
    auto http = std::make_unique<remote::HttpCaptionProvider>(o.caption_endpoint);
    source = "http:" + http->model_id();
    provider = std::move(http);
  } else {
    provider = std::make_unique<expand::ReplayCaptionProvider>(io::read_dictionary(o.replay));
    source = "replay:" + o.replay;
  }
  auto dict = expand::build_dictionary(std::span<const Dataset* const>(ptrs), *provider, cfg);
  json cfg_json = {{"n_p", cfg.n_p}, {"n_f", cfg.n_f}, {"prompts", cfg.prompts}, {"source", source}};
  for (const auto& d : datasets) {
    if (d.meta) cfg_json["datasets"].push_back(d.meta->config_hash);
  }
  dict.meta = ArtifactMeta{"dictionary", hex_hash(cfg_json.dump()), c.seed};
  io::write_dictionary(out_path(c, o.output), dict);
  std::cout << "wrote " << dict.num_descriptions() << " descriptions for " << dict.num_frames_stored()
            << " frames to " << out_path(c, o.output).string() << "\n";
  return 0;
}

match::DescriptionAggregation parse_aggregation(const std::string& s) {
  return s == "mean" ? match::DescriptionAggregation::Mean : match::DescriptionAggregation::Max;
}

int cmd_score(const Common& c, const ScoreOpts& o) {
  const auto dataset = io::read_dataset(o.dataset);
  const auto dict = io::read_dictionary(o.dict);
  require(dataset.size() > 0, "dataset is empty");
  const match::TokenEmbedder embedder(dataset.instances.front().dim);
  const auto scores = match::score_dataset(dataset, dict, embedder, parse_aggregation(o.aggregation));
  json cfg = {{"aggregation", o.aggregation},
              {"dataset", dataset.meta ? dataset.meta->config_hash : ""},
              {"dict", dict.meta ? dict.meta->config_hash : ""}};
  io::write_score_cache(out_path(c, o.output), match::to_cache_entries(dataset, scores),
                        ArtifactMeta{"scores", hex_hash(cfg.dump()), c.seed});
  std::cout << "wrote " << 2 * scores.size() << " score sequences to " << out_path(c, o.output).string() << "\n";
  return 0;
}

void write_run(const Common& c, const train::Trainer& t, const std::string& dataset_hash) {
  const auto& cfg = t.config();
  json meta = {{"kind", "run"}, {"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"dataset_hash", dataset_hash}};
  auto po = io::params_to_json(t.params_o(), cfg.seed, t.step_count());
  auto pn = io::params_to_json(t.params_n(), cfg.seed, t.step_count());
  po["meta"] = meta;
  pn["meta"] = meta;
  io::write_json(out_path(c, "params_o.json"), po);
  io::write_json(out_path(c, "params_n.json"), pn);
  auto ckpt = t.checkpoint();
  ckpt["meta"]["dataset_hash"] = dataset_hash;
  io::write_json(out_path(c, "checkpoint.json"), ckpt);
  io::write_json(out_path(c, "run.json"), {{"meta", meta}, {"config", cfg.to_json()}});
  const std::string header = json{{"meta", meta}}.dump() + "\n";
  io::write_text(out_path(c, "train_steps.jsonl"), header + train::to_jsonl(t.step_logs()));
  io::write_text(out_path(c, "train_epochs.jsonl"), header + train::to_jsonl(t.epoch_logs()));
}

int cmd_train(const Common& c, TrainOpts o) {
  auto cfg = o.cfg;
  if (o.preset == "charades") {
    const auto preset = loss::LossWeights::charades_style();
    cfg.weights.alpha = preset.alpha;
    cfg.weights.beta = preset.beta;
    cfg.warmup_epochs = 7;
  } else if (o.preset != "activitynet") {
    throw ConfigError("unknown preset '" + o.preset + "'");
  }
  if (o.alpha) cfg.weights.alpha = *o.alpha;
  if (o.beta) cfg.weights.beta = *o.beta;
  if (o.warmup_epochs) cfg.warmup_epochs = *o.warmup_epochs;
  cfg.ablation = train::Ablation::from_name(o.ablation);
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.aggregation = parse_aggregation(o.aggregation);
  cfg.inference = train::inference_branch_from_string(o.inference);
  cfg.description_sampling = train::description_sampling_from_string(o.description_sampling);

  const auto dataset = io::read_dataset(o.dataset);
  const auto dict = io::read_dictionary(o.dict);
  std::optional<Dataset> validation;
  if (!o.validation.empty()) validation = io::read_dataset(o.validation);
  const std::string dataset_hash = dataset.meta ? dataset.meta->config_hash : "";

  train::Trainer trainer(dataset, dict, cfg, validation ? &*validation : nullptr);
  if (!o.resume.empty()) trainer.restore(io::read_json(o.resume));
  try {
    trainer.run([&](const train::EpochLog& e) {
      std::cout << "epoch " << e.epoch << (e.warmup ? " (warm-up)" : "") << " total " << e.total;
      if (e.validation) std::cout << " val mIoU " << e.validation->mean_iou;
      std::cout << "\n";
    });
  } catch (const train::NonFiniteLossError&) {
    write_run(c, trainer, dataset_hash);
    throw;
  }
  write_run(c, trainer, dataset_hash);
  std::cout << "trained " << cfg.ablation.label() << " for " << trainer.step_count() << " steps; artifacts in "
            << c.out << "\n";
  return 0;
}

int cmd_eval(const Common& c, const EvalOpts& o) {
  const auto dataset = io::read_dataset(o.dataset);
  const fs::path run(o.run);
  const auto run_info = io::read_json(run / "run.json");
  const auto dataset_hash = run_info.at("meta").value("dataset_hash", std::string());
  const auto test_hash = dataset.meta ? dataset.meta->config_hash : std::string();
  if (!o.force && dataset_hash != test_hash) {
    throw DataError("dataset config hash " + test_hash + " does not match the checkpoint's " + dataset_hash +
                    " (pass --force to evaluate anyway)");
  }
  const auto params_o = io::params_from_json(io::read_json(run / "params_o.json"));
  const auto cfg_json = run_info.at("config");
  train::InferenceOptions opts;
  opts.branch = train::inference_branch_from_string(cfg_json.value("inference", std::string("p_o")));
  opts.seed = c.seed;
  std::optional<model::PredictorParams> params_n;
  std::optional<DescriptionDict> dict;
  if (opts.branch != train::InferenceBranch::Original) {
    require(!o.dict.empty(), "the configured inference branch needs --dict");
    params_n = io::params_from_json(io::read_json(run / "params_n.json"));
    dict = io::read_dictionary(o.dict);
    opts.params_n = &*params_n;
    opts.dict = &*dict;
  }
  const auto preds = train::infer(dataset, params_o, opts);
  const auto gts = train::ground_truths(dataset);
  const auto report = eval::rank1_at_iou(preds, gts, o.thresholds, o.bins);

  const std::string label =
      !o.label.empty() ? o.label
                       : train::Ablation::from_name(cfg_json.value("ablation", std::string("full"))).label();
  auto j = report.to_json();
  j["meta"] = {{"kind", "eval"},
               {"config_hash", run_info.at("meta").at("config_hash")},
               {"seed", run_info.at("meta").at("seed")},
               {"dataset_hash", test_hash}};
  j["label"] = label;
  j["ablation"] = cfg_json.value("ablation", std::string("full"));
  io::write_json(out_path(c, "eval.json"), j);
  io::write_text(out_path(c, "histogram.csv"), report.histogram.to_csv());
  std::cout << report.to_table(label);
  return 0;
}

int cmd_oracle(const Common& c, const OracleOpts& o) {
  std::vector<std::pair<std::string, FrameScoreSequence>> sequences;
  if (!o.scores.empty()) {
    for (const auto& e : io::read_score_cache(o.scores)) {
      sequences.emplace_back(e.video_id + "/" + to_string(e.sequence.kind), e.sequence);
    }
  } else {
    Rng rng = make_stream(c.seed, "oracle");
    for (std::size_t i = 0; i < o.count; ++i) {
      sequences.emplace_back("unimodal" + std::to_string(i), synth::unimodal_scores(o.frames, rng).scores);
    }
  }
  json meta = {{"kind", "oracle"},
               {"config_hash", hex_hash(json{{"grid", o.grid}, {"tau", o.tau}, {"delta", o.delta},
                                             {"scores", o.scores}, {"count", o.count}, {"T", o.frames}}
                                            .dump())},
               {"seed", c.seed}};
  std::string text = json{{"meta", meta}}.dump() + "\n";
  for (const auto& [id, seq] : sequences) {
    const auto r = synth::oracle_boundary(seq, o.grid, o.tau, o.delta);
    const auto iv = clamp_interval(r.boundary);
    text += json{{"id", id},
                 {"center", r.boundary.center},
                 {"width", r.boundary.width},
                 {"interval", {iv.sta, iv.end}},
                 {"loss", r.loss},
                 {"contrast", r.contrast}}
                .dump() +
            "\n";
  }
  io::write_text(out_path(c, "oracle.jsonl"), text);
  std::cout << "wrote " << sequences.size() << " oracle boundaries to " << out_path(c, "oracle.jsonl").string()
            << "\n";
  return 0;
}

int cmd_report(const Common& c, const ReportOpts& o) {
  // Runs sharing an ablation (e.g. several seeds) are averaged into one row.
  struct Row {
    train::Ablation ablation;
    std::vector<double> thresholds;
    std::vector<double> recall;
    double mean_iou = 0.0;
    std::size_t runs = 0;
  };
  std::map<int, Row> rows;
  for (const auto& r : o.runs) {
    const auto j = io::read_json(fs::path(r) / "eval.json");
    const auto ab = train::Ablation::from_name(j.value("ablation", std::string("full")));
    const auto thresholds = j.at("thresholds").get<std::vector<double>>();
    auto& row = rows[2 * ab.pcl + ab.mutual];
    if (row.runs == 0) {
      row.ablation = ab;
      row.thresholds = thresholds;
      row.recall.assign(thresholds.size(), 0.0);
    }
    require(row.thresholds == thresholds, "runs of one variant were evaluated at different thresholds");
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      row.recall[t] += j.at("recall").at(eval::threshold_label(thresholds[t])).get<double>();
    }
    row.mean_iou += j.at("mean_iou").get<double>();
    ++row.runs;
  }
  require(!rows.empty(), "report needs at least one --run");

  const auto& thresholds = rows.begin()->second.thresholds;
  std::ostringstream table;
  char buf[64];
  table << "| Variant  | Mutual | PCL |";
  for (double t : thresholds) {
    std::snprintf(buf, sizeof(buf), " %-7s |", eval::threshold_label(t).c_str());
    table << buf;
  }
  table << " mIoU    | runs |\n|----------|--------|-----|";
  for (std::size_t i = 0; i < thresholds.size(); ++i) table << "---------|";
  table << "---------|------|\n";
  json out = json::array();
  for (auto& [rank, row] : rows) {
    const double inv = 1.0 / static_cast<double>(row.runs);
    for (double& r : row.recall) r *= inv;
    row.mean_iou *= inv;
    std::snprintf(buf, sizeof(buf), "| %-8s | %-6s | %-3s |", row.ablation.label().c_str(),
                  row.ablation.mutual ? "x" : "", row.ablation.pcl ? "x" : "");
    table << buf;
    for (double r : row.recall) {
      std::snprintf(buf, sizeof(buf), " %7.2f |", 100.0 * r);
      table << buf;
    }
    std::snprintf(buf, sizeof(buf), " %7.2f | %4zu |\n", 100.0 * row.mean_iou, row.runs);
    table << buf;
    out.push_back({{"variant", row.ablation.name()},
                   {"label", row.ablation.label()},
                   {"thresholds", row.thresholds},
                   {"recall", row.recall},
                   {"mean_iou", row.mean_iou},
                   {"runs", row.runs}});
  }
  io::write_text(out_path(c, "report.txt"), table.str());
  io::write_json(out_path(c, "report.json"),
                 {{"meta", {{"kind", "report"}, {"config_hash", hex_hash(out.dump())}, {"seed", c.seed}}},
                  {"rows", out}});
  std::cout << table.str();
  return 0;
}

void print_diagnostic(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Temporal boundary grounding engine: data generation, dictionary building, training, evaluation"};
  app.set_config("--config", "", "TOML configuration file");
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random stream");
  app.add_option("--out", common.out, "Output directory");
  app.add_option("--threads", common.threads, "Worker threads")->envname("ETC_BOUND_THREADS")->check(CLI::PositiveNumber);

  GenDataOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic train/test split with ground truth");
  gen_cmd->add_option("--n-instances", gen.synth.n_instances, "Total instances")->capture_default_str();
  gen_cmd->add_option("--n-train", gen.n_train, "Instances in the train split")->capture_default_str();
  gen_cmd->add_option("--frames", gen.synth.num_frames, "Frames per video (T)")->capture_default_str();
  gen_cmd->add_option("--dim", gen.synth.dim, "Feature dimension (C)")->capture_default_str();
  gen_cmd->add_option("--gt-width-min", gen.synth.gt_width_min)->capture_default_str();
  gen_cmd->add_option("--gt-width-max", gen.synth.gt_width_max)->capture_default_str();
  gen_cmd->add_option("--noise", gen.synth.noise_sigma, "Feature noise sigma")->capture_default_str();
  gen_cmd->add_option("--partial-query-fraction", gen.synth.partial_query_fraction)->capture_default_str();
  gen_cmd->add_option("--event-types", gen.synth.event_types)->capture_default_str();
  gen_cmd->add_option("--tokens-per-event", gen.synth.tokens_per_event)->capture_default_str();
  gen_cmd->add_option("--distractor-segments", gen.synth.distractor_segments)->capture_default_str();
  gen_cmd->add_option("--caption-dropout", gen.synth.description_dropout)->capture_default_str();
  gen_cmd->add_option("--vocab", gen.synth.vocab, "Explicit token vocabulary");

  BuildDictOpts bd;
  auto* bd_cmd = app.add_subcommand("build-dict", "Caption every frame and store the description dictionary");
  bd_cmd->add_option("--dataset", bd.datasets, "Dataset JSONL (repeatable)")->required();
  bd_cmd->add_option("--truth", bd.truth, "Ground-truth sidecar for the offline echo captioner");
  bd_cmd->add_option("--caption-endpoint", bd.caption_endpoint, "Base URL of a caption service");
  bd_cmd->add_option("--replay", bd.replay, "Existing dictionary to replay");
  bd_cmd->add_option("--n-p", bd.n_p, "Descriptions per frame")->capture_default_str();
  bd_cmd->add_option("--n-f", bd.n_f, "Frames sampled per region")->capture_default_str();
  bd_cmd->add_option("--max-in-flight", bd.max_in_flight)->capture_default_str();
  bd_cmd->add_option("--output", bd.output, "File name inside --out")->capture_default_str();

  ScoreOpts sc;
  auto* sc_cmd = app.add_subcommand("score", "Compute QDM and QFM score sequences");
  sc_cmd->add_option("--dataset", sc.dataset)->required();
  sc_cmd->add_option("--dict", sc.dict)->required();
  sc_cmd->add_option("--aggregation", sc.aggregation)->check(CLI::IsMember({"max", "mean"}))->capture_default_str();
  sc_cmd->add_option("--output", sc.output)->capture_default_str();

  TrainOpts tr;
  auto* tr_cmd = app.add_subcommand("train", "Train both boundary predictors");
  tr_cmd->add_option("--dataset", tr.dataset)->required();
  tr_cmd->add_option("--dict", tr.dict)->required();
  tr_cmd->add_option("--validation", tr.validation, "Dataset evaluated after every epoch");
  tr_cmd->add_option("--ablation", tr.ablation)->check(CLI::IsMember({"none", "mutual", "pcl", "full"}))
      ->capture_default_str();
  tr_cmd->add_option("--preset", tr.preset, "Loss weight preset")->check(CLI::IsMember({"activitynet", "charades"}))
      ->capture_default_str();
  tr_cmd->add_option("--lr", tr.cfg.lr)->capture_default_str();
  tr_cmd->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  tr_cmd->add_option("--warmup-epochs", tr.warmup_epochs, "Defaults to 3 (activitynet) or 7 (charades)");
  tr_cmd->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  tr_cmd->add_option("--alpha", tr.alpha);
  tr_cmd->add_option("--beta", tr.beta);
  tr_cmd->add_option("--delta-mil", tr.cfg.weights.delta_mil)->capture_default_str();
  tr_cmd->add_option("--tau", tr.cfg.weights.tau)->capture_default_str();
  tr_cmd->add_option("--delta-pcl", tr.cfg.weights.delta_pcl)->capture_default_str();
  tr_cmd->add_option("--k-start", tr.cfg.k_start)->capture_default_str();
  tr_cmd->add_option("--k-end", tr.cfg.k_end)->capture_default_str();
  tr_cmd->add_option("--hidden", tr.cfg.hidden)->capture_default_str();
  tr_cmd->add_option("--attention-scale", tr.cfg.attention_scale)->capture_default_str();
  tr_cmd->add_option("--n-f", tr.cfg.expansion.n_f)->capture_default_str();
  tr_cmd->add_option("--aggregation", tr.aggregation)->check(CLI::IsMember({"max", "mean"}))->capture_default_str();
  tr_cmd->add_option("--inference", tr.inference)->check(CLI::IsMember({"p_o", "p_n", "midpoint"}))
      ->capture_default_str();
  tr_cmd->add_option("--description-sampling", tr.description_sampling)
      ->check(CLI::IsMember({"per_step", "per_epoch"}))
      ->capture_default_str();
  tr_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");

  EvalOpts ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a trained run on a labelled dataset");
  ev_cmd->add_option("--dataset", ev.dataset)->required();
  ev_cmd->add_option("--run", ev.run, "Directory written by train")->required();
  ev_cmd->add_option("--dict", ev.dict, "Dictionary for the p_n and midpoint branches");
  ev_cmd->add_option("--label", ev.label, "Row label in the table");
  ev_cmd->add_option("--thresholds", ev.thresholds, "IoU thresholds");
  ev_cmd->add_option("--bins", ev.bins, "Histogram bins")->capture_default_str();
  ev_cmd->add_flag("--force", ev.force, "Evaluate even when dataset and checkpoint hashes differ");

  OracleOpts orc;
  auto* or_cmd = app.add_subcommand("oracle", "Exhaustive grid minimizer of the contrast objective");
  or_cmd->add_option("--scores", orc.scores, "Score cache; synthetic unimodal sequences when omitted");
  or_cmd->add_option("--count", orc.count)->capture_default_str();
  or_cmd->add_option("--frames", orc.frames)->capture_default_str();
  or_cmd->add_option("--grid", orc.grid)->capture_default_str();
  or_cmd->add_option("--tau", orc.tau)->capture_default_str();
  or_cmd->add_option("--delta", orc.delta)->capture_default_str();

  ReportOpts rp;
  auto* rp_cmd = app.add_subcommand("report", "Consolidate evaluated runs into an ablation table");
  rp_cmd->add_option("--run", rp.runs, "Run directory containing eval.json (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(common.out);
    if (*gen_cmd) return cmd_gen_data(common, gen);
    if (*bd_cmd) return cmd_build_dict(common, bd);
    if (*sc_cmd) return cmd_score(common, sc);
    if (*tr_cmd) return cmd_train(common, tr);
    if (*ev_cmd) return cmd_eval(common, ev);
    if (*or_cmd) return cmd_oracle(common, orc);
    if (*rp_cmd) return cmd_report(common, rp);
  } catch (const ConfigError& e) {
    print_diagnostic("config", e.what());
    return 2;
  } catch (const train::NonFiniteLossError& e) {
    print_diagnostic("non_finite_loss", e.what());
    return 3;
  } catch (const DataError& e) {
    print_diagnostic("data", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_diagnostic("data", e.what());
    return 3;
  }
  return 2;
}

}  // namespace etcbound::cli
