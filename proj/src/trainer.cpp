#include "etcbound/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "etcbound/io.hpp"

namespace etcbound::train {

using nlohmann::json;

Ablation Ablation::from_name(const std::string& name) {
  if (name == "none") return {false, false};
  if (name == "mutual") return {true, false};
  if (name == "pcl") return {false, true};
  if (name == "full") return {true, true};
  throw ConfigError("unknown ablation '" + name + "' (expected none, mutual, pcl or full)");
}

std::string Ablation::name() const {
  if (mutual && pcl) return "full";
  if (mutual) return "mutual";
  if (pcl) return "pcl";
  return "none";
}

std::string Ablation::label() const {
  if (mutual && pcl) return "Full";
  if (mutual) return "+Mutual";
  if (pcl) return "+PCL";
  return "Base";
}

const char* to_string(InferenceBranch branch) {
  switch (branch) {
    case InferenceBranch::Original: return "p_o";
    case InferenceBranch::Expanded: return "p_n";
    case InferenceBranch::Midpoint: return "midpoint";
  }
  return "p_o";
}

InferenceBranch inference_branch_from_string(const std::string& name) {
  if (name == "p_o") return InferenceBranch::Original;
  if (name == "p_n") return InferenceBranch::Expanded;
  if (name == "midpoint") return InferenceBranch::Midpoint;
  throw ConfigError("unknown inference branch '" + name + "' (expected p_o, p_n or midpoint)");
}

const char* to_string(DescriptionSampling sampling) {
  return sampling == DescriptionSampling::PerStep ? "per_step" : "per_epoch";
}

DescriptionSampling description_sampling_from_string(const std::string& name) {
  if (name == "per_step") return DescriptionSampling::PerStep;
  if (name == "per_epoch") return DescriptionSampling::PerEpoch;
  throw ConfigError("unknown description sampling '" + name + "' (expected per_step or per_epoch)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (warmup_epochs >= epochs) throw ConfigError("warmup_epochs must be smaller than epochs");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(k_start > 0.0 && k_end > 0.0)) throw ConfigError("sharpness schedule must be positive");
  if (hidden < 2) throw ConfigError("hidden width must be >= 2");
  if (!(attention_scale >= 0.0)) throw ConfigError("attention_scale must be >= 0");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  weights.validate();
  expansion.validate();
}

json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"epochs", epochs},
          {"warmup_epochs", warmup_epochs},
          {"batch_size", batch_size},
          {"alpha", weights.alpha},
          {"beta", weights.beta},
          {"delta_mil", weights.delta_mil},
          {"tau", weights.tau},
          {"delta_pcl", weights.delta_pcl},
          {"ablation", ablation.name()},
          {"seed", seed},
          {"k_start", k_start},
          {"k_end", k_end},
          {"hidden", hidden},
          {"attention_scale", attention_scale},
          {"n_p", expansion.n_p},
          {"n_f", expansion.n_f},
          {"prompts", expansion.prompts},
          {"aggregation", aggregation == match::DescriptionAggregation::Max ? "max" : "mean"},
          {"inference", to_string(inference)},
          {"description_sampling", to_string(description_sampling)}};
}

std::string TrainConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

json StepLog::to_json() const {
  return {{"step", step}, {"l_go", l_go}, {"l_gn", l_gn}, {"l_m", l_m},   {"l_c", l_c},
          {"l_cf", l_cf}, {"total", total}, {"epoch", epoch}, {"lr", lr}, {"k", k}};
}

json EpochLog::to_json() const {
  json j = {{"epoch", epoch}, {"warmup", warmup}, {"l_go", l_go}, {"l_gn", l_gn},
            {"l_m", l_m},     {"l_c", l_c},       {"l_cf", l_cf}, {"total", total}};
  if (validation) {
    json rec = json::object();
    for (std::size_t t = 0; t < validation->thresholds.size(); ++t) {
      rec[eval::threshold_label(validation->thresholds[t])] = validation->recall[t];
    }
    j["validation"] = {{"recall", rec}, {"mean_iou", validation->mean_iou}};
  }
  return j;
}

NonFiniteLossError::NonFiniteLossError(std::string term, std::uint64_t step)
    : std::runtime_error("non-finite value in loss term '" + term + "' at step " + std::to_string(step)),
      term_(std::move(term)),
      step_(step) {}

namespace {

// Runs fn(i) for i in [0, n) across up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Uniformly random cyclic permutation: sigma(i) != i for every i.
std::vector<std::size_t> sattolo(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[uniform_index(rng, i)]);
  return p;
}

std::string step_key(const char* stream, std::uint64_t step) {
  return std::string(stream) + "/" + std::to_string(step);
}

}  // namespace

struct Trainer::InstanceOutcome {
  double l_go = 0.0, l_gn = 0.0, l_m = 0.0, l_c = 0.0, l_cf = 0.0, total = 0.0;
  std::vector<double> grad_o;
  std::vector<double> grad_n;
};

Trainer::Trainer(const Dataset& train, const DescriptionDict& dict, TrainConfig cfg, const Dataset* validation)
    : train_(train),
      dict_(dict),
      validation_(validation),
      cfg_(std::move(cfg)),
      embedder_(train.instances.empty() ? 1 : train.instances.front().dim) {
  cfg_.validate();
  if (train_.size() < 2) throw DataError("training needs at least two instances for negative pairs");
  const std::size_t C = train_.instances.front().dim;
  for (const auto& inst : train_.instances) {
    inst.validate();
    if (inst.dim != C) throw ConfigError("instances disagree on feature dimension");
  }
  scores_ = match::score_dataset(train_, dict_, embedder_, cfg_.aggregation);
  for (const auto& inst : train_.instances) {
    encoded_query_.push_back(model::encode_inputs(inst, inst.query_embedding, cfg_.attention_scale));
    timelines_.push_back(inst.timeline());
  }

  Rng init = make_stream(cfg_.seed, "init");
  params_o_ = model::PredictorParams::initialized(C, cfg_.hidden, init);
  params_n_ = model::PredictorParams::initialized(C, cfg_.hidden, init);
  params_o_.attention_scale = params_n_.attention_scale = cfg_.attention_scale;
  params_o_.k = params_n_.k = cfg_.k_start;
  adam_o_ = optim::Adam(params_o_.num_weights());
  adam_n_ = optim::Adam(params_n_.num_weights());

  steps_per_epoch_ = (train_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
  begin_epoch();
}

double Trainer::current_k() const {
  const auto total = total_steps();
  if (total <= 1) return cfg_.k_end;
  const double frac = static_cast<double>(std::min<std::uint64_t>(step_, total - 1)) /
                      static_cast<double>(total - 1);
  return cfg_.k_start + (cfg_.k_end - cfg_.k_start) * frac;
}

void Trainer::begin_epoch() {
  order_.resize(train_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng sampler = make_stream(cfg_.seed, step_key("sampler", epoch_));
  shuffle(std::span<std::size_t>(order_), sampler);
  cursor_ = 0;
  if (cfg_.description_sampling == DescriptionSampling::PerEpoch) {
    epoch_regions_.resize(train_.size());
    parallel_for(train_.size(), cfg_.threads, [&](std::size_t i) {
      const auto& inst = train_.instances[i];
      epoch_regions_[i] = model::predict_boundary_value(params_o_, inst, inst.query_embedding);
    });
  }
}

std::vector<double> Trainer::sample_description(std::size_t index, const std::string& slot) const {
  const auto& inst = train_.instances[index];
  TemporalBoundary region;
  std::string key;
  if (cfg_.description_sampling == DescriptionSampling::PerEpoch) {
    region = epoch_regions_[index];
    key = step_key("description-epoch", epoch_) + "/" + std::to_string(index);
  } else {
    region = model::predict_boundary_value(params_o_, inst, inst.query_embedding);
    key = step_key("description", step_) + "/" + slot;
  }
  Rng rng = make_stream(cfg_.seed, key);
  return embedder_.embed_text(
      expand::sample_region_description(dict_, inst.video_id, inst.num_frames, region, cfg_.expansion, rng).text);
}

Trainer::InstanceOutcome Trainer::evaluate_instance(std::size_t index, std::size_t negative,
                                                    const std::vector<double>& desc_pos,
                                                    const std::vector<double>& desc_neg, double k,
                                                    bool warmup) const {
  const auto& inst = train_.instances[index];
  const auto& timeline = timelines_[index];
  const auto& w = cfg_.weights;
  diff::Tape tape;
  const auto bo = model::BoundParams::bind(tape, params_o_);
  const auto bn = model::BoundParams::bind(tape, params_n_);

  const auto p_o = model::predict_boundary(tape, bo, encoded_query_[index]);
  const auto enc_n = model::encode_inputs(inst, desc_pos, cfg_.attention_scale);
  const auto p_n = model::predict_boundary(tape, bn, enc_n);

  const auto feat_o = model::pool_boundary_feature(inst, model::soft_window_mask(p_o, timeline, k));
  const auto l_go = loss::mil_loss(diff::cosine(feat_o, inst.query_embedding),
                                   diff::cosine(feat_o, train_.instances[negative].query_embedding), w.delta_mil);
  const auto feat_n = model::pool_boundary_feature(inst, model::soft_window_mask(p_n, timeline, k));
  const auto l_gn = loss::mil_loss(diff::cosine(feat_n, desc_pos), diff::cosine(feat_n, desc_neg), w.delta_mil);
  const auto l_m = loss::mutual_loss(p_o, p_n);
  const auto l_c = loss::pcl_loss(p_o, scores_[index].qdm, w.tau, w.delta_pcl, timeline, k);
  const auto l_cf = loss::pcl_loss(p_o, scores_[index].qfm, w.tau, w.delta_pcl, timeline, k);

  auto root = l_go + l_gn;
  if (!warmup) {
    loss::LossWeights applied = w;
    applied.alpha = cfg_.ablation.mutual ? w.alpha : 0.0;
    applied.beta = cfg_.ablation.pcl ? w.beta : 0.0;
    root = loss::total_loss(l_go, l_gn, l_m, l_c, l_cf, applied);
  }

  const std::pair<const char*, diff::Var> terms[] = {{"l_go", l_go}, {"l_gn", l_gn}, {"l_m", l_m},
                                                     {"l_c", l_c},   {"l_cf", l_cf}, {"total", root}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v.value())) throw NonFiniteLossError(name, step_ + 1);
  }
  tape.backward(root);

  InstanceOutcome out;
  out.l_go = l_go.value();
  out.l_gn = l_gn.value();
  out.l_m = l_m.value();
  out.l_c = l_c.value();
  out.l_cf = l_cf.value();
  out.total = root.value();
  out.grad_o = bo.gradient();
  out.grad_n = bn.gradient();
  return out;
}

bool Trainer::step() {
  if (done()) return false;
  const std::size_t begin = cursor_ * cfg_.batch_size;
  const std::size_t end = std::min(begin + cfg_.batch_size, order_.size());
  const std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order_.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t B = batch.size();
  const double k = current_k();
  const bool warmup = in_warmup();

  // Negative pairing: a derangement inside the batch, or any other instance
  // when the batch holds a single element.
  Rng neg_rng = make_stream(cfg_.seed, step_key("negatives", step_));
  std::vector<std::size_t> negative(B);
  if (B >= 2) {
    const auto sigma = sattolo(B, neg_rng);
    for (std::size_t b = 0; b < B; ++b) negative[b] = batch[sigma[b]];
  } else {
    const std::size_t r = uniform_index(neg_rng, train_.size() - 1);
    negative[0] = r >= batch[0] ? r + 1 : r;
  }

  // Region descriptions sampled from p_o.
  std::vector<std::vector<double>> desc(B);
  parallel_for(B, cfg_.threads, [&](std::size_t b) { desc[b] = sample_description(batch[b], std::to_string(b)); });
  // The negative description belongs to the paired instance in the batch.
  std::vector<std::size_t> neg_slot(B, 0);
  if (B >= 2) {
    for (std::size_t b = 0; b < B; ++b) {
      neg_slot[b] = static_cast<std::size_t>(std::find(batch.begin(), batch.end(), negative[b]) - batch.begin());
    }
  }
  std::vector<double> lone_negative_desc;
  if (B == 1) lone_negative_desc = sample_description(negative[0], "neg");

  std::vector<InstanceOutcome> outcomes(B);
  parallel_for(B, cfg_.threads, [&](std::size_t b) {
    const auto& neg_desc = B >= 2 ? desc[neg_slot[b]] : lone_negative_desc;
    outcomes[b] = evaluate_instance(batch[b], negative[b], desc[b], neg_desc, k, warmup);
  });

  StepLog log;
  log.step = step_ + 1;
  log.epoch = epoch_;
  log.k = k;
  std::vector<double> g_o(params_o_.num_weights(), 0.0);
  std::vector<double> g_n(params_n_.num_weights(), 0.0);
  for (const auto& o : outcomes) {
    log.l_go += o.l_go;
    log.l_gn += o.l_gn;
    log.l_m += o.l_m;
    log.l_c += o.l_c;
    log.l_cf += o.l_cf;
    log.total += o.total;
    for (std::size_t i = 0; i < g_o.size(); ++i) g_o[i] += o.grad_o[i];
    for (std::size_t i = 0; i < g_n.size(); ++i) g_n[i] += o.grad_n[i];
  }
  const double inv = 1.0 / static_cast<double>(B);
  for (double* v : {&log.l_go, &log.l_gn, &log.l_m, &log.l_c, &log.l_cf, &log.total}) *v *= inv;
  for (double& g : g_o) g *= inv;
  for (double& g : g_n) g *= inv;

  const std::uint64_t warmup_steps = steps_per_epoch_ * cfg_.warmup_epochs;
  log.lr = optim::inverse_sqrt_lr(cfg_.lr, step_ + 1, warmup_steps);

  auto flat_o = params_o_.pack();
  auto flat_n = params_n_.pack();
  adam_o_.step(flat_o, g_o, log.lr);
  adam_n_.step(flat_n, g_n, log.lr);
  params_o_.unpack(flat_o);
  params_n_.unpack(flat_n);

  ++step_;
  params_o_.k = params_n_.k = current_k();
  step_logs_.push_back(log);
  if (++cursor_ == steps_per_epoch_) finish_epoch();
  return true;
}

void Trainer::finish_epoch() {
  EpochLog e;
  e.epoch = epoch_;
  e.warmup = in_warmup();
  std::size_t n = 0;
  for (const auto& s : step_logs_) {
    if (s.epoch != epoch_) continue;
    e.l_go += s.l_go;
    e.l_gn += s.l_gn;
    e.l_m += s.l_m;
    e.l_c += s.l_c;
    e.l_cf += s.l_cf;
    e.total += s.total;
    ++n;
  }
  if (n > 0) {
    const double inv = 1.0 / static_cast<double>(n);
    for (double* v : {&e.l_go, &e.l_gn, &e.l_m, &e.l_c, &e.l_cf, &e.total}) *v *= inv;
  }
  if (validation_ != nullptr && validation_->size() > 0) {
    const auto preds = infer(*validation_, params_o_);
    const auto gts = ground_truths(*validation_);
    e.validation = eval::rank1_at_iou(preds, gts);
  }
  epoch_logs_.push_back(std::move(e));
  ++epoch_;
  if (epoch_ < cfg_.epochs) begin_epoch();
}

void Trainer::run(const std::function<void(const EpochLog&)>& on_epoch) {
  while (!done()) {
    const auto epochs_before = epoch_logs_.size();
    step();
    if (on_epoch && epoch_logs_.size() > epochs_before) on_epoch(epoch_logs_.back());
  }
}

namespace {

json moments_to_json(const optim::Adam& adam) {
  return {{"t", adam.steps()}, {"m", adam.first_moment()}, {"v", adam.second_moment()}};
}

void moments_from_json(optim::Adam& adam, const json& j) {
  adam.restore(j.at("t").get<std::uint64_t>(), j.at("m").get<std::vector<double>>(),
               j.at("v").get<std::vector<double>>());
}

}  // namespace

json Trainer::checkpoint() const {
  json steps = json::array();
  for (const auto& s : step_logs_) steps.push_back(s.to_json());
  json epochs = json::array();
  for (const auto& e : epoch_logs_) epochs.push_back(e.to_json());
  json regions = json::array();
  for (const auto& r : epoch_regions_) regions.push_back({r.center, r.width});
  return {{"meta", {{"kind", "checkpoint"}, {"config_hash", cfg_.hash()}, {"seed", cfg_.seed}}},
          {"config", cfg_.to_json()},
          {"step", step_},
          {"epoch", epoch_},
          {"cursor", cursor_},
          {"params_o", io::params_to_json(params_o_, cfg_.seed, step_)},
          {"params_n", io::params_to_json(params_n_, cfg_.seed, step_)},
          {"adam_o", moments_to_json(adam_o_)},
          {"adam_n", moments_to_json(adam_n_)},
          {"step_logs", steps},
          {"epoch_logs", epochs},
          {"epoch_regions", regions}};
}

void Trainer::restore(const json& state) {
  try {
    const auto hash = state.at("meta").at("config_hash").get<std::string>();
    if (hash != cfg_.hash()) {
      throw ConfigError("checkpoint config hash " + hash + " does not match " + cfg_.hash());
    }
    auto po = io::params_from_json(state.at("params_o"));
    auto pn = io::params_from_json(state.at("params_n"));
    if (po.num_weights() != params_o_.num_weights() || pn.num_weights() != params_n_.num_weights()) {
      throw ConfigError("checkpoint parameter shapes do not match the configuration");
    }
    params_o_ = std::move(po);
    params_n_ = std::move(pn);
    moments_from_json(adam_o_, state.at("adam_o"));
    moments_from_json(adam_n_, state.at("adam_n"));
    step_ = state.at("step").get<std::uint64_t>();
    epoch_ = state.at("epoch").get<std::size_t>();
    step_logs_.clear();
    for (const auto& s : state.at("step_logs")) {
      StepLog l;
      l.step = s.at("step");
      l.epoch = s.at("epoch");
      l.l_go = s.at("l_go");
      l.l_gn = s.at("l_gn");
      l.l_m = s.at("l_m");
      l.l_c = s.at("l_c");
      l.l_cf = s.at("l_cf");
      l.total = s.at("total");
      l.lr = s.at("lr");
      l.k = s.at("k");
      step_logs_.push_back(l);
    }
    epoch_logs_.clear();
    for (const auto& e : state.at("epoch_logs")) {
      EpochLog l;
      l.epoch = e.at("epoch");
      l.warmup = e.at("warmup");
      l.l_go = e.at("l_go");
      l.l_gn = e.at("l_gn");
      l.l_m = e.at("l_m");
      l.l_c = e.at("l_c");
      l.l_cf = e.at("l_cf");
      l.total = e.at("total");
      if (e.contains("validation")) {
        eval::EvalReport r;
        for (const auto& [label, value] : e.at("validation").at("recall").items()) {
          r.thresholds.push_back(std::stod(label.substr(3)));
          r.recall.push_back(value.get<double>());
        }
        r.mean_iou = e.at("validation").at("mean_iou");
        l.validation = r;
      }
      epoch_logs_.push_back(std::move(l));
    }
    if (epoch_ < cfg_.epochs) begin_epoch();
    cursor_ = state.at("cursor").get<std::size_t>();
    epoch_regions_.clear();
    for (const auto& r : state.at("epoch_regions")) epoch_regions_.push_back({r.at(0), r.at(1)});
    if (cfg_.description_sampling == DescriptionSampling::PerEpoch && epoch_ < cfg_.epochs &&
        epoch_regions_.size() != train_.size()) {
      throw DataError("checkpoint epoch regions do not match the training set");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

TrainResult train(const Dataset& train_set, const DescriptionDict& dict, const TrainConfig& cfg,
                  const Dataset* validation) {
  Trainer trainer(train_set, dict, cfg, validation);
  trainer.run();
  return {trainer.params_o(), trainer.params_n(), trainer.step_logs(), trainer.epoch_logs()};
}

std::vector<Interval> infer(const Dataset& dataset, const model::PredictorParams& params_o,
                            const InferenceOptions& options) {
  std::vector<Interval> out;
  out.reserve(dataset.size());
  const bool needs_n = options.branch != InferenceBranch::Original;
  if (needs_n && (options.params_n == nullptr || options.dict == nullptr)) {
    throw ConfigError("the p_n and midpoint inference branches need params_n and a description dictionary");
  }
  std::optional<match::TokenEmbedder> embedder;
  if (needs_n && dataset.size() > 0) embedder.emplace(dataset.instances.front().dim);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset.instances[i];
    const auto p_o = model::predict_boundary_value(params_o, inst, inst.query_embedding);
    if (!needs_n) {
      out.push_back(clamp_interval(p_o));
      continue;
    }
    Rng rng = make_stream(options.seed, "inference/" + inst.video_id);
    const auto sample = expand::sample_region_description(*options.dict, inst.video_id, inst.num_frames, p_o,
                                                          options.expansion, rng);
    const auto p_n = model::predict_boundary_value(*options.params_n, inst, embedder->embed_text(sample.text));
    if (options.branch == InferenceBranch::Expanded) {
      out.push_back(clamp_interval(p_n));
    } else {
      out.push_back(clamp_interval({0.5 * (p_o.center + p_n.center), 0.5 * (p_o.width + p_n.width)}));
    }
  }
  return out;
}

std::vector<Interval> ground_truths(const Dataset& dataset) {
  std::vector<Interval> out;
  out.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    if (!inst.gt) throw DataError("instance '" + inst.video_id + "' has no ground-truth interval");
    out.push_back(*inst.gt);
  }
  return out;
}

std::string to_jsonl(const std::vector<StepLog>& logs) {
  std::string out;
  for (const auto& l : logs) out += l.to_json().dump() + "\n";
  return out;
}

std::string to_jsonl(const std::vector<EpochLog>& logs) {
  std::string out;
  for (const auto& l : logs) out += l.to_json().dump() + "\n";
  return out;
}

}  // namespace etcbound::train
