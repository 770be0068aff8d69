// tk: generate data, train, evaluate, stress-test and benchmark transducer models.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "tk/data.hpp"
#include "tk/decode.hpp"
#include "tk/experiment.hpp"
#include "tk/metrics.hpp"

namespace fs = std::filesystem;
using tk::experiment::RunConfig;

namespace {

// Registers --<key> for every config key; values given on the command line
// win over the config file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key = value config file");
    for (const auto& k : RunConfig::keys()) cmd->add_option("--" + k.name, values[k.name], k.help);
  }

  std::map<std::string, std::string> given(CLI::App* cmd) const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : values) {
      if (cmd->count("--" + k) > 0) out[k] = v;
    }
    return out;
  }

  RunConfig resolve(CLI::App* cmd) const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& [k, v] : given(cmd)) cfg.set(k, v);
    cfg.validate();
    return cfg;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw tk::DataError("cannot write " + path.string());
  return os;
}

int run_gen_data(const std::string& spec_path, const std::string& out_dir, const std::optional<std::string>& seed) {
  tk::data::SynthSpec spec;
  if (!spec_path.empty()) spec = tk::data::read_synth_spec(spec_path);
  if (seed) tk::data::apply_synth_setting(spec, "seed", *seed);
  spec.validate();
  tk::data::Dataset ds = tk::data::gen_corpus(spec);
  tk::data::write_dataset(ds, out_dir);
  std::cout << "wrote " << ds.train.size() << " train, " << ds.dev.size() << " dev, " << ds.test.size()
            << " test utterances to " << out_dir << '\n';
  return 0;
}

int run_train(const RunConfig& cfg) {
  tk::data::Dataset ds = tk::data::read_dataset(cfg.get("data.dir"));
  tk::experiment::TrainOutcome out = tk::experiment::train(cfg, ds, &std::cout);
  const fs::path dir = cfg.get("checkpoint.dir");
  tk::experiment::save_run(dir, cfg, out);
  std::cout << "best epoch " << out.best_epoch << ", checkpoint " << (dir / "model.ckpt").string() << '\n';
  return 0;
}

tk::experiment::LoadedRun load(const std::string& checkpoint, const std::map<std::string, std::string>& overrides) {
  return tk::experiment::load_run(checkpoint, overrides);
}

std::string checkpoint_dir(const std::string& flag, const std::map<std::string, std::string>& overrides) {
  if (!flag.empty()) return flag;
  auto it = overrides.find("checkpoint.dir");
  return it != overrides.end() ? it->second : RunConfig().get("checkpoint.dir");
}

int run_evaluate(const std::string& checkpoint, std::map<std::string, std::string> overrides, std::string split,
                 const std::string& out_path, const std::string& baseline) {
  auto run = load(checkpoint, overrides);
  if (split.empty()) split = run.cfg.get("eval.split");
  tk::data::Dataset ds = tk::data::read_dataset(run.cfg.get("data.dir"));
  auto result = tk::experiment::evaluate_split(*run.model, run.tables, run.cfg, ds, split);
  auto rows = tk::experiment::result_rows(run.cfg.get("run.name"), result,
                                          tk::metrics::count_params(run.model->params()));
  if (!baseline.empty()) tk::experiment::attach_relative(rows, tk::experiment::read_results_csv(baseline));
  const fs::path path = out_path.empty() ? fs::path(run.cfg.get("results.dir")) /
                                               (run.cfg.get("run.name") + "_" + split + ".csv")
                                         : fs::path(out_path);
  auto os = open_out(path);
  tk::experiment::write_results_csv(os, rows);
  tk::experiment::write_results_csv(std::cout, rows);
  for (const auto* tr : {&result.h, &result.p}) {
    if (tr->present && tr->vote_coverage) {
      std::cerr << (tr == &result.h ? "H" : "P") << " dialect-token vote coverage " << *tr->vote_coverage << "%\n";
    }
  }
  return 0;
}

int run_stress(const std::string& checkpoint, std::map<std::string, std::string> overrides, std::string split,
               const std::string& out_path) {
  auto run = load(checkpoint, overrides);
  if (split.empty()) split = run.cfg.get("eval.split");
  tk::data::Dataset ds = tk::data::read_dataset(run.cfg.get("data.dir"));
  const auto items = tk::experiment::make_eval_items(ds.split(split));
  const auto& m = *run.model;
  auto rows = tk::decode::stress_test(m, m.has_task(tk::model::Task::kH) ? &run.tables.h : nullptr,
                                      m.has_task(tk::model::Task::kP) ? &run.tables.p : nullptr, items,
                                      run.cfg.get_list("stress.p_grid"), run.cfg.get_u64("run.seed"),
                                      tk::experiment::eval_options(run.cfg, ds));
  const fs::path path = out_path.empty() ? fs::path(run.cfg.get("results.dir")) /
                                               (run.cfg.get("run.name") + "_stress.csv")
                                         : fs::path(out_path);
  auto os = open_out(path);
  tk::decode::write_stress_csv(os, rows);
  tk::decode::write_stress_csv(std::cout, rows);
  return 0;
}

int run_bench(const std::string& checkpoint, std::map<std::string, std::string> overrides, std::string split,
              const std::string& out_path) {
  auto run = load(checkpoint, overrides);
  if (split.empty()) split = run.cfg.get("eval.split");
  tk::data::Dataset ds = tk::data::read_dataset(run.cfg.get("data.dir"));
  auto report = tk::experiment::bench_rtf(*run.model, run.tables, run.cfg, ds, split,
                                          static_cast<int>(run.cfg.get_int("bench.runs")));
  const fs::path path = out_path.empty() ? fs::path(run.cfg.get("results.dir")) /
                                               (run.cfg.get("run.name") + "_rtf.csv")
                                         : fs::path(out_path);
  auto os = open_out(path);
  tk::experiment::write_efficiency_csv(os, report);
  tk::experiment::write_efficiency_csv(std::cout, report);
  return 0;
}

int fail(const char* code, int exit_code, const std::string& msg) {
  std::string line = msg;
  for (char& c : line) {
    if (c == '\n') c = ' ';
  }
  std::cerr << "error[" << code << "]: " << line << '\n';
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-dialect transducer toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::string spec_path, out_dir = "data";
  std::optional<std::string> gen_seed;
  gen->add_option("--spec", spec_path, "synthetic corpus spec (key = value)");
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--seed", gen_seed, "generator seed");

  auto* train = app.add_subcommand("train", "train a model");
  ConfigFlags train_flags;
  train_flags.attach(train);
  std::string task_alias, mode_alias;
  std::optional<std::string> train_seed;
  train->add_option("--task", task_alias, "shorthand for --model.task (H, P or HP)");
  train->add_option("--dialect-mode", mode_alias, "shorthand for --dialect.conditioning");
  train->add_option("--seed", train_seed, "shorthand for --run.seed");

  std::string checkpoint, split, out_path, baseline;
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a split");
  ConfigFlags eval_flags;
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", checkpoint, "run directory written by train");
  eval->add_option("--split", split, "train, dev or test");
  eval->add_option("--out", out_path, "results CSV path");
  eval->add_option("--baseline", baseline, "results CSV of the baseline for the rel_percent column");

  auto* stress = app.add_subcommand("stress-test", "decode with forced dialect ids of controlled correctness");
  ConfigFlags stress_flags;
  stress_flags.attach(stress);
  std::string p_grid;
  std::optional<std::string> stress_seed;
  stress->add_option("--checkpoint", checkpoint, "run directory written by train");
  stress->add_option("--split", split, "split to decode");
  stress->add_option("--p-grid", p_grid, "comma-separated correctness values");
  stress->add_option("--seed", stress_seed, "protocol seed");
  stress->add_option("--out", out_path, "stress CSV path");

  auto* bench = app.add_subcommand("bench-rtf", "time decoding over a split");
  ConfigFlags bench_flags;
  bench_flags.attach(bench);
  std::optional<std::string> runs;
  bench->add_option("--checkpoint", checkpoint, "run directory written by train");
  bench->add_option("--split", split, "split to decode");
  bench->add_option("--runs", runs, "timed runs");
  bench->add_option("--out", out_path, "efficiency CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("config", 2, e.what());
  }

  try {
    if (*gen) return run_gen_data(spec_path, out_dir, gen_seed);
    if (*train) {
      RunConfig cfg = train_flags.resolve(train);
      if (!task_alias.empty()) {
        std::string t;
        for (char c : task_alias) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        cfg.set("model.task", t);
      }
      if (!mode_alias.empty()) cfg.set("dialect.conditioning", mode_alias);
      if (train_seed) cfg.set("run.seed", *train_seed);
      cfg.validate();
      return run_train(cfg);
    }
    auto overrides_for = [](ConfigFlags& f, CLI::App* cmd) {
      auto o = f.given(cmd);
      if (!f.config_path.empty()) {
        RunConfig file;
        file.load_file(f.config_path);
        for (const auto& k : RunConfig::keys()) {
          if (!o.count(k.name) && file.get(k.name) != RunConfig().get(k.name)) o[k.name] = file.get(k.name);
        }
      }
      return o;
    };
    if (*eval) {
      auto o = overrides_for(eval_flags, eval);
      return run_evaluate(checkpoint_dir(checkpoint, o), o, split, out_path, baseline);
    }
    if (*stress) {
      auto o = overrides_for(stress_flags, stress);
      if (!p_grid.empty()) o["stress.p_grid"] = p_grid;
      if (stress_seed) o["run.seed"] = *stress_seed;
      return run_stress(checkpoint_dir(checkpoint, o), o, split, out_path);
    }
    if (*bench) {
      auto o = overrides_for(bench_flags, bench);
      if (runs) o["bench.runs"] = *runs;
      return run_bench(checkpoint_dir(checkpoint, o), o, split, out_path);
    }
  } catch (const tk::ConfigError& e) {
    return fail("config", 2, e.what());
  } catch (const tk::DataError& e) {
    return fail("data", 3, e.what());
  } catch (const tk::NumericError& e) {
    return fail("numeric", 4, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("data", 3, e.what());
  } catch (const tk::MetricError& e) {
    return fail("data", 3, e.what());
  } catch (const std::logic_error& e) {
    return fail("config", 2, e.what());
  } catch (const std::exception& e) {
    return fail("internal", 1, e.what());
  }
  return 0;
}
