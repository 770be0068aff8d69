#include "tk/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "tk/adam.hpp"
#include "tk/checkpoint.hpp"

namespace tk::experiment {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

const std::vector<RunConfig::Key>& RunConfig::keys() {
  static const std::vector<Key> k = {
      {"data.dir", "data", "dataset directory"},
      {"checkpoint.dir", "checkpoints/run", "run directory for checkpoint, tables and log"},
      {"results.dir", "results", "directory for result CSVs"},
      {"run.name", "system", "system label in result tables"},
      {"run.seed", "1", "seed for initialization, shuffling and the stress protocol"},
      {"model.task", "hp", "decoders to train: hp, h or p"},
      {"model.encoder_dim", "32", "encoder width D"},
      {"model.num_blocks", "2", "encoder blocks"},
      {"model.subsample", "4", "encoder stride in input frames"},
      {"model.ff_dim", "64", "encoder feed-forward width"},
      {"model.embed_dim", "16", "predictor embedding width"},
      {"model.context_size", "2", "predictor context length"},
      {"model.joint_dim", "32", "joint hidden width"},
      {"model.loss", "full", "transducer loss: full or pruned"},
      {"model.s_range", "5", "pruned band width"},
      {"model.simple_loss_scale", "0.5", "weight of the additive lattice loss in pruned mode"},
      {"model.weight_h", "1", "weight of L_H"},
      {"model.weight_p", "1", "weight of L_P"},
      {"dialect.adc", "false", "auxiliary dialect classifier"},
      {"dialect.dii", "false", "dialect identity input"},
      {"dialect.conditioning", "none", "target conditioning: none, psc, prsc or tic"},
      {"dialect.lambda", "0.5", "weight of L_A"},
      {"train.epochs", "15", "training epochs"},
      {"train.batch_size", "8", "utterances per update"},
      {"train.lr", "0.01", "Adam learning rate"},
      {"train.beta1", "0.9", "Adam beta1"},
      {"train.beta2", "0.98", "Adam beta2"},
      {"train.eps", "1e-8", "Adam epsilon"},
      {"train.grad_clip", "5", "global gradient norm cap, 0 disables"},
      {"train.lr_schedule", "cosine", "constant|cosine (decays to lr_floor * lr over all updates)"},
      {"train.lr_floor", "0.05", "final learning rate as a fraction of train.lr"},
      {"train.warmup_steps", "270", "updates of linear learning-rate warm-up (one epoch of the default corpus)"},
      {"train.feature_noise", "0.6", "std of Gaussian noise added to training features, redrawn every update"},
      {"train.dialect", "", "train on one dialect only (name)"},
      {"train.max_utterances", "0", "cap on training utterances, 0 keeps all"},
      {"eval.split", "test", "split for evaluate, stress-test and bench-rtf"},
      {"eval.max_symbols", "10", "greedy emissions per frame"},
      {"eval.dialect_source", "auto", "DII input at inference: auto, adc, truth or fixed"},
      {"eval.fixed_dialect", "", "dialect name used when eval.dialect_source = fixed"},
      {"eval.feed_truth", "false", "feed ground-truth dialect tokens to the predictor"},
      {"stress.p_grid", "0,0.25,0.5,0.75,1", "forced-dialect correctness values"},
      {"bench.runs", "5", "timed decoding passes"},
  };
  return k;
}

RunConfig::RunConfig() {
  for (const Key& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::load_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

long RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos == v.size() && v.find('-') == std::string::npos) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos == v.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError(key + ": bad list element '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

model::ModelConfig RunConfig::model_config(int num_dialects, int feature_dim) const {
  model::ModelConfig m;
  m.encoder.input_dim = feature_dim;
  m.encoder.model_dim = get_int("model.encoder_dim");
  m.encoder.num_blocks = get_int("model.num_blocks");
  m.encoder.subsample_factor = get_int("model.subsample");
  m.encoder.ff_dim = get_int("model.ff_dim");
  m.predictor.embed_dim = get_int("model.embed_dim");
  m.predictor.context_size = static_cast<int>(get_int("model.context_size"));
  m.joint_dim = get_int("model.joint_dim");
  const std::string task = get("model.task");
  if (task != "hp" && task != "h" && task != "p") throw ConfigError("model.task must be hp, h or p, got '" + task + "'");
  m.task_h = task != "p";
  m.task_p = task != "h";
  m.num_dialects = num_dialects;
  m.mode.adc = get_bool("dialect.adc");
  m.mode.dii = get_bool("dialect.dii");
  m.mode.conditioning = dialect::parse_strategy(get("dialect.conditioning"));
  const std::string loss = get("model.loss");
  if (loss == "full") {
    m.loss = model::LossKind::kFull;
  } else if (loss == "pruned") {
    m.loss = model::LossKind::kPruned;
  } else {
    throw ConfigError("model.loss must be full or pruned, got '" + loss + "'");
  }
  m.s_range = get_int("model.s_range");
  m.simple_loss_scale = get_double("model.simple_loss_scale");
  m.lambda = get_double("dialect.lambda");
  m.weight_h = get_double("model.weight_h");
  m.weight_p = get_double("model.weight_p");
  m.validate();
  return m;
}

void RunConfig::validate() const {
  model_config(1, 1);
  if (get_int("train.epochs") < 1) throw ConfigError("train.epochs must be >= 1");
  if (get_int("train.batch_size") < 1) throw ConfigError("train.batch_size must be >= 1");
  if (get_double("train.lr") <= 0) throw ConfigError("train.lr must be positive");
  if (get_double("train.grad_clip") < 0) throw ConfigError("train.grad_clip must be >= 0");
  if (get("train.lr_schedule") != "constant" && get("train.lr_schedule") != "cosine") {
    throw ConfigError("train.lr_schedule must be constant or cosine, got '" + get("train.lr_schedule") + "'");
  }
  if (get_double("train.lr_floor") < 0 || get_double("train.lr_floor") > 1) {
    throw ConfigError("train.lr_floor must lie in [0,1]");
  }
  if (get_int("train.warmup_steps") < 0) throw ConfigError("train.warmup_steps must be >= 0");
  if (get_double("train.feature_noise") < 0) throw ConfigError("train.feature_noise must be >= 0");
  if (get_int("train.max_utterances") < 0) throw ConfigError("train.max_utterances must be >= 0");
  if (get_int("eval.max_symbols") < 1) throw ConfigError("eval.max_symbols must be >= 1");
  if (get_int("bench.runs") < 1) throw ConfigError("bench.runs must be >= 1");
  get_u64("run.seed");
  get_bool("eval.feed_truth");
  for (double p : get_list("stress.p_grid")) {
    if (p < 0 || p > 1) throw ConfigError("stress.p_grid values must lie in [0,1]");
  }
  const std::string src = get("eval.dialect_source");
  if (src != "auto" && src != "adc" && src != "truth" && src != "fixed") {
    throw ConfigError("eval.dialect_source must be auto, adc, truth or fixed");
  }
  const bool adc = get_bool("dialect.adc");
  const bool dii = get_bool("dialect.dii");
  if (dii && !adc && (src == "auto" || src == "adc")) {
    throw ConfigError("dialect.dii without dialect.adc needs eval.dialect_source = truth or fixed");
  }
  if (src == "adc" && !adc) throw ConfigError("eval.dialect_source = adc needs dialect.adc = true");
  if (src == "fixed" && get("eval.fixed_dialect").empty()) {
    throw ConfigError("eval.dialect_source = fixed needs eval.fixed_dialect");
  }
}

std::string RunConfig::to_string() const {
  std::ostringstream os;
  for (const Key& k : keys()) os << k.name << " = " << values_.at(k.name) << '\n';
  return os.str();
}

void RunConfig::save(const fs::path& path) const {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << to_string();
}

TokenTables build_tables(const data::Dataset& dataset) {
  return {data::TokenTable::build(dataset, 'h'), data::TokenTable::build(dataset, 'p')};
}

std::vector<model::Example> make_examples(const std::vector<data::Utterance>& utts, const TokenTables& tables) {
  std::vector<model::Example> out;
  out.reserve(utts.size());
  for (const data::Utterance& u : utts) {
    model::Example ex;
    ex.id = u.id;
    ex.features = u.features.cast<double>();
    ex.target_h = tables.h.encode(u.transcript_h, u.id);
    ex.target_p = tables.p.encode(u.transcript_p, u.id);
    ex.dialect = u.dialect;
    ex.audio_seconds = u.audio_seconds;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<decode::EvalItem> make_eval_items(const std::vector<data::Utterance>& utts) {
  std::vector<decode::EvalItem> out;
  out.reserve(utts.size());
  for (const data::Utterance& u : utts) {
    out.push_back({u.id, u.features.cast<double>(), u.dialect, u.transcript_h, u.transcript_p, u.audio_seconds});
  }
  return out;
}

decode::EvalOptions eval_options(const RunConfig& cfg, const data::Dataset& dataset) {
  cfg.validate();
  decode::EvalOptions o;
  o.max_symbols_per_frame = static_cast<int>(cfg.get_int("eval.max_symbols"));
  o.feed_truth = cfg.get_bool("eval.feed_truth");
  const std::string src = cfg.get("eval.dialect_source");
  if (src == "truth") {
    o.dii_source = decode::DiiSource::kTruth;
  } else if (src == "fixed") {
    o.dii_source = decode::DiiSource::kFixed;
    o.fixed_dialect = dataset.dialect_index(cfg.get("eval.fixed_dialect"));
  } else {
    o.dii_source = decode::DiiSource::kAdc;
  }
  return o;
}

namespace {

std::vector<data::Utterance> filter_dialect(const std::vector<data::Utterance>& utts, int d) {
  std::vector<data::Utterance> out;
  for (const auto& u : utts) {
    if (u.dialect == d) out.push_back(u);
  }
  return out;
}

double clip_gradients(std::vector<Tensor<double>*>& params, double max_norm) {
  double sq = 0;
  for (auto* p : params) sq += p->grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* p : params) p->grad() *= s;
  }
  return norm;
}

}  // namespace

TrainOutcome train(const RunConfig& cfg, const data::Dataset& dataset, std::ostream* progress) {
  cfg.validate();
  TrainOutcome out;
  out.tables = build_tables(dataset);
  const int K = static_cast<int>(dataset.dialect_names.size());
  const model::ModelConfig mcfg = cfg.model_config(K, dataset.feature_dim);
  const std::uint64_t seed = cfg.get_u64("run.seed");

  std::vector<data::Utterance> train_utts = dataset.train;
  std::vector<data::Utterance> dev_utts = dataset.dev;
  if (!cfg.get("train.dialect").empty()) {
    const int d = dataset.dialect_index(cfg.get("train.dialect"));
    train_utts = filter_dialect(train_utts, d);
    dev_utts = filter_dialect(dev_utts, d);
  }
  const long cap = cfg.get_int("train.max_utterances");
  if (cap > 0 && static_cast<long>(train_utts.size()) > cap) train_utts.resize(static_cast<std::size_t>(cap));
  if (train_utts.empty()) throw DataError("no training utterances selected");
  if (dev_utts.empty()) throw DataError("no dev utterances selected");

  std::vector<model::Example> examples = make_examples(train_utts, out.tables);
  std::vector<decode::EvalItem> dev_items = make_eval_items(dev_utts);
  const decode::EvalOptions eopts = eval_options(cfg, dataset);

  model::MultiTaskModel net(mcfg, out.tables.h.size(), out.tables.p.size(), seed);
  std::vector<Tensor<double>*> params = net.params().all();
  AdamState<double> adam;
  adam.lr = cfg.get_double("train.lr");
  adam.beta1 = cfg.get_double("train.beta1");
  adam.beta2 = cfg.get_double("train.beta2");
  adam.eps = cfg.get_double("train.eps");
  const double clip = cfg.get_double("train.grad_clip");
  const std::size_t batch = static_cast<std::size_t>(cfg.get_int("train.batch_size"));
  const int epochs = static_cast<int>(cfg.get_int("train.epochs"));
  const double base_lr = adam.lr;
  const bool cosine = cfg.get("train.lr_schedule") == "cosine";
  const double floor = cfg.get_double("train.lr_floor");
  const long warmup = cfg.get_int("train.warmup_steps");
  const double total_steps = static_cast<double>(epochs) * static_cast<double>((examples.size() + batch - 1) / batch);
  long step = 0;

  std::mt19937_64 shuffle_rng(seed ^ 0x9e3779b97f4a7c15ull);
  const double feature_noise = cfg.get_double("train.feature_noise");
  std::mt19937_64 noise_rng(seed ^ 0x5851f42d4c957f2dull);
  std::normal_distribution<double> gauss(0.0, feature_noise);
  std::vector<model::Example> noisy;
  std::vector<std::size_t> order(examples.size());
  double best_score = 0;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog row;
    row.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      std::vector<const model::Example*> items;
      for (std::size_t i = b; i < std::min(order.size(), b + batch); ++i) items.push_back(&examples[order[i]]);
      if (feature_noise > 0) {
        noisy.clear();
        for (const model::Example* e : items) {
          noisy.push_back(*e);
          for (Index k = 0; k < noisy.back().features.size(); ++k) noisy.back().features.data()[k] += gauss(noise_rng);
        }
        for (std::size_t i = 0; i < items.size(); ++i) items[i] = &noisy[i];
      }
      model::G g;
      model::ForwardResult fr = model::multitask_forward(g, net, items);
      const std::size_t batch_no = b / batch + 1;
      if (!std::isfinite(fr.l_final)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no));
      }
      g.backward(fr.loss);
      const double norm = clip_gradients(params, clip);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batch_no));
      }
      adam.lr = base_lr;
      if (cosine) {
        const double progress_frac = static_cast<double>(step) / total_steps;
        adam.lr *= floor + (1 - floor) * 0.5 * (1 + std::cos(std::numbers::pi * progress_frac));
      }
      if (step < warmup) adam.lr *= static_cast<double>(step + 1) / static_cast<double>(warmup);
      ++step;
      adam_step(params, adam);
      row.train_loss += fr.l_final;
      row.l_asr += fr.l_asr;
      row.l_a += fr.l_a;
      ++batches;
    }
    row.train_loss /= static_cast<double>(batches);
    row.l_asr /= static_cast<double>(batches);
    row.l_a /= static_cast<double>(batches);

    auto snapshot = std::make_unique<model::MultiTaskModel>(net);
    round_to_checkpoint_precision(snapshot->params());
    decode::EvalResult dev = decode::evaluate(*snapshot, mcfg.task_h ? &out.tables.h : nullptr,
                                              mcfg.task_p ? &out.tables.p : nullptr, dev_items, eopts);
    if (dev.h.present) row.dev_cer = dev.h.rate;
    if (dev.p.present) row.dev_ser = dev.p.rate;
    row.dev_dialect_acc = dev.dialect_acc();
    row.dev_score = row.dev_cer.value_or(0) + row.dev_ser.value_or(0);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.best || row.dev_score < best_score) {
      best_score = row.dev_score;
      out.best_epoch = epoch;
      out.best = std::move(snapshot);
    }
    if (progress) {
      auto opt = [](const std::optional<double>& v) {
        std::ostringstream s;
        if (v) {
          s << std::fixed << std::setprecision(2) << *v;
        } else {
          s << "-";
        }
        return s.str();
      };
      *progress << "epoch " << epoch << " loss " << std::fixed << std::setprecision(4) << row.train_loss << " l_asr "
                << row.l_asr << " l_a " << row.l_a << " dev_cer " << opt(row.dev_cer) << " dev_ser "
                << opt(row.dev_ser) << " dev_dialect_acc " << opt(row.dev_dialect_acc) << " (" << std::setprecision(1)
                << row.seconds << "s)" << std::endl;
    }
    out.log.push_back(row);
  }
  return out;
}

void write_train_log(const fs::path& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  auto cell = [&os](const std::optional<double>& v) {
    if (v) os << *v;
  };
  os << std::setprecision(12);
  os << "epoch,train_loss,l_asr,l_a,dev_cer,dev_ser,dev_dialect_acc,seconds\n";
  for (const EpochLog& r : log) {
    os << r.epoch << ',' << r.train_loss << ',' << r.l_asr << ',' << r.l_a << ',';
    cell(r.dev_cer);
    os << ',';
    cell(r.dev_ser);
    os << ',';
    cell(r.dev_dialect_acc);
    os << ',' << r.seconds << '\n';
  }
}

void save_run(const fs::path& dir, const RunConfig& cfg, const TrainOutcome& outcome) {
  if (!outcome.best) throw ContractError("save_run: no trained model");
  fs::create_directories(dir);
  write_checkpoint(dir / "model.ckpt", outcome.best->params());
  const auto& mc = outcome.best->config();
  std::ofstream(dir / "model.meta") << "dialects " << mc.num_dialects << "\nfeature_dim " << mc.encoder.input_dim
                                    << '\n';
  cfg.save(dir / "config.txt");
  outcome.tables.h.save(dir / "tokens_h.txt");
  outcome.tables.p.save(dir / "tokens_p.txt");
  write_train_log(dir / "train_log.csv", outcome.log);
}

LoadedRun load_run(const fs::path& dir, const std::map<std::string, std::string>& overrides) {
  if (!fs::exists(dir / "model.ckpt")) throw DataError("no checkpoint at " + (dir / "model.ckpt").string());
  LoadedRun run;
  run.cfg.load_file(dir / "config.txt");
  for (const auto& [k, v] : overrides) run.cfg.set(k, v);
  run.tables = {data::TokenTable::load(dir / "tokens_h.txt"), data::TokenTable::load(dir / "tokens_p.txt")};
  std::ifstream meta(dir / "model.meta");
  std::string k1, k2;
  int K = 0, F = 0;
  if (!(meta >> k1 >> K >> k2 >> F) || k1 != "dialects" || k2 != "feature_dim") {
    throw SchemaError("unreadable " + (dir / "model.meta").string());
  }
  model::ModelConfig mcfg = run.cfg.model_config(K, F);
  run.model = std::make_unique<model::MultiTaskModel>(mcfg, run.tables.h.size(), run.tables.p.size(),
                                                      run.cfg.get_u64("run.seed"));
  load_checkpoint(dir / "model.ckpt", run.model->params());
  return run;
}

decode::EvalResult evaluate_split(const model::MultiTaskModel& model, const TokenTables& tables, const RunConfig& cfg,
                                  const data::Dataset& dataset, const std::string& split) {
  const auto items = make_eval_items(dataset.split(split));
  if (items.empty()) throw DataError("split '" + split + "' is empty");
  return decode::evaluate(model, model.has_task(model::Task::kH) ? &tables.h : nullptr,
                          model.has_task(model::Task::kP) ? &tables.p : nullptr, items, eval_options(cfg, dataset));
}

std::vector<ResultRow> result_rows(const std::string& system, const decode::EvalResult& result,
                                   double params_millions) {
  std::vector<ResultRow> rows;
  const double speed = result.wall_seconds > 0 ? metrics::rtfx(result.audio_seconds, result.wall_seconds) : 0.0;
  auto add = [&](const decode::TaskResult& tr, const char* task, const char* unit) {
    if (!tr.present) return;
    ResultRow r;
    r.system = system;
    r.task = task;
    r.unit = unit;
    r.error_rate_percent = tr.rate;
    r.dialect_acc_percent = result.adc_acc ? result.adc_acc : tr.vote_acc;
    r.params_millions = params_millions;
    r.rtfx = speed;
    rows.push_back(r);
  };
  add(result.h, "H", "CER");
  add(result.p, "P", "SER");
  return rows;
}

void attach_relative(std::vector<ResultRow>& rows, const std::vector<ResultRow>& baseline) {
  for (ResultRow& r : rows) {
    for (const ResultRow& b : baseline) {
      if (b.task == r.task) r.rel_percent = metrics::relative_improvement(b.error_rate_percent, r.error_rate_percent);
    }
  }
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  const bool rel = std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.rel_percent.has_value(); });
  os << "system,task,unit,error_rate_percent,dialect_acc_percent,params_millions,rtfx" << (rel ? ",rel_percent" : "")
     << '\n';
  os << std::setprecision(10);
  for (const ResultRow& r : rows) {
    os << r.system << ',' << r.task << ',' << r.unit << ',' << r.error_rate_percent << ',';
    if (r.dialect_acc_percent) os << *r.dialect_acc_percent;
    os << ',' << r.params_millions << ',' << r.rtfx;
    if (rel) {
      os << ',';
      if (r.rel_percent) os << *r.rel_percent;
    }
    os << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read results file " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("system,task,unit,error_rate_percent", 0) != 0) {
    throw SchemaError(path.string() + ": not a results CSV");
  }
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 7) throw SchemaError(path.string() + ": short row '" + line + "'");
    try {
      ResultRow r;
      r.system = f[0];
      r.task = f[1];
      r.unit = f[2];
      r.error_rate_percent = std::stod(f[3]);
      if (!f[4].empty()) r.dialect_acc_percent = std::stod(f[4]);
      r.params_millions = std::stod(f[5]);
      r.rtfx = std::stod(f[6]);
      if (f.size() > 7 && !f[7].empty()) r.rel_percent = std::stod(f[7]);
      rows.push_back(r);
    } catch (const std::invalid_argument&) {
      throw SchemaError(path.string() + ": bad number in row '" + line + "'");
    }
  }
  return rows;
}

metrics::EfficiencyReport bench_rtf(const model::MultiTaskModel& model, const TokenTables& tables,
                                    const RunConfig& cfg, const data::Dataset& dataset, const std::string& split,
                                    int runs) {
  if (runs < 1) throw ConfigError("bench-rtf needs at least one run");
  metrics::EfficiencyReport report;
  report.params_millions = metrics::count_params(model.params());
  evaluate_split(model, tables, cfg, dataset, split);
  for (int i = 0; i < runs; ++i) {
    decode::EvalResult r = evaluate_split(model, tables, cfg, dataset, split);
    if (!(r.wall_seconds > 0)) throw NumericError("bench-rtf: non-positive wall time");
    report.audio_seconds = r.audio_seconds;
    report.wall_seconds.push_back(r.wall_seconds);
  }
  return report;
}

void write_efficiency_csv(std::ostream& os, const metrics::EfficiencyReport& report) {
  os << "run,params_millions,audio_seconds,wall_seconds,rtfx\n";
  os << std::setprecision(10);
  const auto per_run = report.per_run_rtfx();
  double wall = 0;
  for (std::size_t i = 0; i < per_run.size(); ++i) {
    os << i + 1 << ',' << report.params_millions << ',' << report.audio_seconds << ',' << report.wall_seconds[i] << ','
       << per_run[i] << '\n';
    wall += report.wall_seconds[i];
  }
  os << "mean," << report.params_millions << ',' << report.audio_seconds << ','
     << wall / static_cast<double>(per_run.size()) << ',' << report.mean_rtfx() << '\n';
}

}  // namespace tk::experiment
