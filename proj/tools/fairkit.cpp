#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairkit/cli/commands.hpp"

using namespace fairkit;

namespace {

int run_train(const std::vector<std::string>& args) {
  const cli::TrainConfig config = cli::parse_config(args);
  const auto out = cli::cmd_train(config);
  std::cout << "run " << out.run_dir.string() << " finalized, selected epoch " << out.selected_epoch << "\n";
  for (const auto& s : out.stages) std::cout << "  " << s << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    // Bare flags behave like `train`, so `fairkit --dataset ... --INLP` works.
    if (argc > 1 && std::strncmp(argv[1], "--", 2) == 0 && std::strcmp(argv[1], "--help") != 0 &&
        std::strcmp(argv[1], "--version") != 0)
      return run_train(std::vector<std::string>(argv + 1, argv + argc));

    CLI::App app{"fairkit: fairness-aware classification toolkit"};
    app.set_version_flag("--version", cli::kVersion);
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train one configuration (all TrainConfig keys are flags)");
    train->allow_extras();
    train->prefix_command();

    auto* analyze = app.add_subcommand("analyze", "select, aggregate and tabulate finalized runs");
    cli::AnalyzeOptions aopt;
    std::string results_dir = "results", out_dir, criterion = "DTO";
    analyze->add_option("--results_dir", results_dir, "directory holding run directories");
    analyze->add_option("--out_dir", out_dir, "where tables go (default: results_dir)");
    analyze->add_option("--criterion", criterion, "DTO, ConstrainedFairness or ConstrainedPerformance");
    analyze->add_option("--threshold", aopt.criterion.threshold, "threshold for constrained criteria");
    analyze->add_flag("--pareto_only", aopt.pareto_only, "keep only each method's dev Pareto frontier");

    auto* generate = app.add_subcommand("generate", "write a synthetic dataset as JSONL");
    std::string spec, out = "data/synthetic";
    Index d = 8;
    int classes = 2, groups = 2;
    std::uint64_t seed = 0;
    generate->add_option("--spec", spec, "synthetic spec YAML (default spec when omitted)");
    generate->add_option("--out", out, "output directory");
    generate->add_option("--emb_size", d);
    generate->add_option("--num_classes", classes);
    generate->add_option("--num_groups", groups);
    generate->add_option("--seed", seed);

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }

    if (*train) return run_train(train->remaining());
    if (*analyze) {
      aopt.results_dir = results_dir;
      if (!out_dir.empty()) aopt.out_dir = out_dir;
      aopt.criterion.kind = analysis::criterion_from_string(criterion);
      const auto res = cli::cmd_analyze(aopt);
      std::cout << analysis::emit_table(res.table, analysis::TableFormat::Markdown);
      return 0;
    }
    if (*generate) {
      cli::cmd_generate(spec, out, d, classes, groups, seed);
      std::cout << "wrote " << out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
