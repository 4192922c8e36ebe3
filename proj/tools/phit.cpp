#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "phit/cli.hpp"

namespace {

void add_experiment_flags(CLI::App* sub, phit::cli::CommandOptions& opt) {
  sub->add_option("--config", opt.config_path, "Experiment config file (key = value lines)");
  sub->add_option("--domain", opt.domain, "Dataset domain, e.g. ECG or Motion");
  sub->add_option("--dataset", opt.dataset, "Restrict to one dataset");
  sub->add_option("--seeds", opt.seeds, "Seeds, e.g. 0-4 or 0,2,3");
  sub->add_option("--out", opt.out, "Output root for run directories and results.csv");
  sub->add_option("--jobs", opt.jobs, "Parallel (dataset, seed) runs")->check(CLI::PositiveNumber);
  sub->add_option("--set", opt.overrides, "Override a config key (key=value), repeatable");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = phit::cli;
  CLI::App app{"Multi-dataset pretext pre-training for time series classification"};
  app.set_version_flag("--version", "phit " + cli::build_id());
  app.require_subcommand(1);

  cli::CommandOptions opt;
  auto* pretrain = app.add_subcommand("pretrain", "Train pretext models for one domain (one per seed)");
  add_experiment_flags(pretrain, opt);
  auto* finetune = app.add_subcommand("finetune", "Fine-tune pretext models per dataset and score the ensemble");
  add_experiment_flags(finetune, opt);
  auto* baseline = app.add_subcommand("baseline", "Train the random-init baseline per dataset and score the ensemble");
  add_experiment_flags(baseline, opt);

  auto* evaluate = app.add_subcommand("evaluate", "Comparison reports from a results CSV");
  add_experiment_flags(evaluate, opt);
  evaluate->add_option("--results", opt.results, "Results CSV (default: <out>/results.csv)");
  evaluate->add_option("--mode", opt.mode, "pair, matrix, domain or trainsize")->capture_default_str();
  evaluate->add_option("--method", opt.method, "Classifier under test")->capture_default_str();
  evaluate->add_option("--baseline", opt.baseline, "Reference classifier")->capture_default_str();
  evaluate->add_option("--classifiers", opt.classifiers, "Comma list for matrix mode (default: all)");

  auto* exp = app.add_subcommand("export-filters", "Write the kernels of one module as CSV");
  exp->add_option("--checkpoint", opt.checkpoint, "Checkpoint base path (without .manifest)")->required();
  exp->add_option("--module", opt.module, "1-based module index")->capture_default_str();
  exp->add_option("--tag", opt.tag, "Model tag written in each row (default: model kind)");
  exp->add_option("--out", opt.output, "Output CSV path, '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  if (pretrain->parsed()) return cli::cmd_pretrain(opt);
  if (finetune->parsed()) return cli::cmd_finetune(opt);
  if (baseline->parsed()) return cli::cmd_baseline(opt);
  if (evaluate->parsed()) return cli::cmd_evaluate(opt);
  return cli::cmd_export_filters(opt);
}
