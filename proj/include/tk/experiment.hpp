#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tk/data.hpp"
#include "tk/decode.hpp"
#include "tk/model.hpp"
#include "tk/tokens.hpp"

namespace tk::experiment {

// Flat dotted `key = value` settings. Every key has a default and can be
// overridden by a command-line flag of the same name.
class RunConfig {
 public:
  struct Key {
    std::string name;
    std::string default_value;
    std::string help;
  };

  RunConfig();

  static const std::vector<Key>& keys();

  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

  // Model hyperparameters for a dataset with this many dialects and features.
  model::ModelConfig model_config(int num_dialects, int feature_dim) const;
  void validate() const;

  void save(const std::filesystem::path& path) const;
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

// Base token tables of both orthographies.
struct TokenTables {
  data::TokenTable h;
  data::TokenTable p;
};

TokenTables build_tables(const data::Dataset& dataset);

std::vector<model::Example> make_examples(const std::vector<data::Utterance>& utts, const TokenTables& tables);
std::vector<decode::EvalItem> make_eval_items(const std::vector<data::Utterance>& utts);

decode::EvalOptions eval_options(const RunConfig& cfg, const data::Dataset& dataset);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;  // mean L_Final
  double l_asr = 0;
  double l_a = 0;
  std::optional<double> dev_cer;
  std::optional<double> dev_ser;
  std::optional<double> dev_dialect_acc;
  double dev_score = 0;  // sum of available dev error rates
  double seconds = 0;
};

struct TrainOutcome {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  // Parameters already rounded to checkpoint precision.
  std::unique_ptr<model::MultiTaskModel> best;
  TokenTables tables;
};

// Trains on the configured subset of `dataset`; progress lines go to `progress`.
TrainOutcome train(const RunConfig& cfg, const data::Dataset& dataset, std::ostream* progress = nullptr);

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

// Checkpoint directory: model.ckpt, config.txt, tokens_h.txt, tokens_p.txt, train_log.csv.
void save_run(const std::filesystem::path& dir, const RunConfig& cfg, const TrainOutcome& outcome);

struct LoadedRun {
  RunConfig cfg;
  TokenTables tables;
  std::unique_ptr<model::MultiTaskModel> model;
};

// `overrides` are applied on top of the saved config.
LoadedRun load_run(const std::filesystem::path& dir, const std::map<std::string, std::string>& overrides = {});

decode::EvalResult evaluate_split(const model::MultiTaskModel& model, const TokenTables& tables,
                                  const RunConfig& cfg, const data::Dataset& dataset, const std::string& split);

struct ResultRow {
  std::string system;
  std::string task;  // H or P
  std::string unit;  // CER or SER
  double error_rate_percent = 0;
  std::optional<double> dialect_acc_percent;
  double params_millions = 0;
  double rtfx = 0;
  std::optional<double> rel_percent;
};

std::vector<ResultRow> result_rows(const std::string& system, const decode::EvalResult& result, double params_millions);

// Fills rel_percent from baseline rows with the same task.
void attach_relative(std::vector<ResultRow>& rows, const std::vector<ResultRow>& baseline);

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

// One warm-up pass then `runs` timed decoding passes over the split.
metrics::EfficiencyReport bench_rtf(const model::MultiTaskModel& model, const TokenTables& tables,
                                    const RunConfig& cfg, const data::Dataset& dataset, const std::string& split,
                                    int runs);

void write_efficiency_csv(std::ostream& os, const metrics::EfficiencyReport& report);

}  // namespace tk::experiment
