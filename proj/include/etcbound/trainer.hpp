#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "etcbound/boundary_model.hpp"
#include "etcbound/evalkit.hpp"
#include "etcbound/expand.hpp"
#include "etcbound/losses.hpp"
#include "etcbound/matchers.hpp"
#include "etcbound/optim.hpp"
#include "etcbound/types.hpp"

namespace etcbound::train {

struct Ablation {
  bool mutual = true;
  bool pcl = true;

  // none | mutual | pcl | full
  static Ablation from_name(const std::string& name);
  std::string name() const;
  // Base, +Mutual, +PCL, Full
  std::string label() const;
  bool operator==(const Ablation&) const = default;
};

enum class InferenceBranch { Original, Expanded, Midpoint };
const char* to_string(InferenceBranch branch);
InferenceBranch inference_branch_from_string(const std::string& name);

// When the region description behind p_n is drawn: every step from the
// current p_o, or once per epoch from p_o at the start of the epoch.
enum class DescriptionSampling { PerStep, PerEpoch };
const char* to_string(DescriptionSampling sampling);
DescriptionSampling description_sampling_from_string(const std::string& name);

struct TrainConfig {
  double lr = 4e-4;
  std::size_t epochs = 30;
  std::size_t warmup_epochs = 3;
  std::size_t batch_size = 32;
  loss::LossWeights weights;
  Ablation ablation;
  std::uint64_t seed = 0;
  double k_start = 50.0;
  double k_end = 500.0;
  std::size_t hidden = 16;
  double attention_scale = 10.0;
  expand::ExpansionConfig expansion;
  match::DescriptionAggregation aggregation = match::DescriptionAggregation::Max;
  InferenceBranch inference = InferenceBranch::Original;
  DescriptionSampling description_sampling = DescriptionSampling::PerStep;
  std::size_t threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  // Hash of every setting that changes results (threads excluded).
  std::string hash() const;
};

struct StepLog {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double l_go = 0.0;
  double l_gn = 0.0;
  double l_m = 0.0;
  double l_c = 0.0;
  double l_cf = 0.0;
  double total = 0.0;  // objective actually optimized this step
  double lr = 0.0;
  double k = 0.0;

  nlohmann::json to_json() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  bool warmup = false;
  double l_go = 0.0;
  double l_gn = 0.0;
  double l_m = 0.0;
  double l_c = 0.0;
  double l_cf = 0.0;
  double total = 0.0;
  std::optional<eval::EvalReport> validation;

  nlohmann::json to_json() const;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::string term, std::uint64_t step);
  const std::string& term() const { return term_; }
  std::uint64_t step() const { return step_; }

 private:
  std::string term_;
  std::uint64_t step_;
};

// Joint optimization of the original-query predictor (p_o) and the
// expanded-description predictor (p_n).
class Trainer {
 public:
  Trainer(const Dataset& train, const DescriptionDict& dict, TrainConfig cfg,
          const Dataset* validation = nullptr);

  const TrainConfig& config() const { return cfg_; }
  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::uint64_t total_steps() const { return steps_per_epoch_ * cfg_.epochs; }
  std::uint64_t step_count() const { return step_; }
  bool done() const { return step_ >= total_steps(); }
  bool in_warmup() const { return epoch_ < cfg_.warmup_epochs; }

  // One optimizer update. Returns false once every epoch has run. On a
  // non-finite loss throws NonFiniteLossError and leaves the state untouched.
  bool step();
  void run(const std::function<void(const EpochLog&)>& on_epoch = {});

  const model::PredictorParams& params_o() const { return params_o_; }
  const model::PredictorParams& params_n() const { return params_n_; }
  const std::vector<StepLog>& step_logs() const { return step_logs_; }
  const std::vector<EpochLog>& epoch_logs() const { return epoch_logs_; }

  // Full resumable state: parameters, optimizer moments, sampler position.
  nlohmann::json checkpoint() const;
  void restore(const nlohmann::json& state);

  double current_k() const;

 private:
  struct InstanceOutcome;

  void begin_epoch();
  std::vector<double> sample_description(std::size_t index, const std::string& slot) const;
  void finish_epoch();
  InstanceOutcome evaluate_instance(std::size_t index, std::size_t negative,
                                    const std::vector<double>& desc_pos, const std::vector<double>& desc_neg,
                                    double k, bool warmup) const;

  const Dataset& train_;
  const DescriptionDict& dict_;
  const Dataset* validation_;
  TrainConfig cfg_;
  match::TokenEmbedder embedder_;
  std::vector<match::InstanceScores> scores_;
  std::vector<std::vector<double>> encoded_query_;
  std::vector<std::vector<double>> timelines_;

  model::PredictorParams params_o_;
  model::PredictorParams params_n_;
  optim::Adam adam_o_;
  optim::Adam adam_n_;

  std::size_t steps_per_epoch_ = 0;
  std::uint64_t step_ = 0;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;  // batches consumed in the current epoch
  std::vector<std::size_t> order_;
  std::vector<TemporalBoundary> epoch_regions_;  // per-epoch sampling only
  std::vector<StepLog> step_logs_;
  std::vector<EpochLog> epoch_logs_;
};

struct TrainResult {
  model::PredictorParams params_o;
  model::PredictorParams params_n;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
};

TrainResult train(const Dataset& train, const DescriptionDict& dict, const TrainConfig& cfg,
                  const Dataset* validation = nullptr);

struct InferenceOptions {
  InferenceBranch branch = InferenceBranch::Original;
  // Needed by the Expanded and Midpoint branches only.
  const model::PredictorParams* params_n = nullptr;
  const DescriptionDict* dict = nullptr;
  expand::ExpansionConfig expansion;
  std::uint64_t seed = 0;
};

// Clamped predicted interval per instance.
std::vector<Interval> infer(const Dataset& dataset, const model::PredictorParams& params_o,
                            const InferenceOptions& options = {});

std::vector<Interval> ground_truths(const Dataset& dataset);

std::string to_jsonl(const std::vector<StepLog>& logs);
std::string to_jsonl(const std::vector<EpochLog>& logs);

}  // namespace etcbound::train
