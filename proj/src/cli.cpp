#include "coachmarl/cli.hpp"

#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "coachmarl/config.hpp"
#include "coachmarl/errors.hpp"
#include "coachmarl/metrics_io.hpp"
#include "coachmarl/trainer.hpp"

namespace coachmarl {

namespace {

constexpr const char* kUsage =
    "usage: coachmarl <command> [options]\n"
    "commands:\n"
    "  train   --config FILE [--seed N] [--out DIR]\n"
    "  eval    --checkpoint FILE [--checkpoint FILE ...] [--config FILE] [--rates R,R,...]\n"
    "          [--episodes N] [--behavior freeze|random] [--seed N] [--out FILE]\n"
    "          [--forced-crash I,J,...] [--trajectory-out FILE]\n"
    "  render  --trajectory FILE\n"
    "  sweep   --config FILE --betas B,B,... --rhos R,R,... --seeds S,S,... [--out DIR]\n";

template <class T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::istringstream items(text);
  std::string item;
  while (std::getline(items, item, ',')) {
    std::istringstream one(item);
    T v{};
    std::string extra;
    if (!(one >> v) || (one >> extra)) throw ParameterError(std::string(flag) + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError(std::string(flag) + " needs at least one value");
  return out;
}

std::vector<double> parse_rates(const std::string& text, const char* flag) {
  auto rates = parse_list<double>(text, flag);
  for (double r : rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ParameterError(std::string(flag) + ": rate " + std::to_string(r) + " outside [0, 1]");
  }
  return rates;
}

RunConfig config_for_checkpoint(const std::string& config_path, const std::filesystem::path& checkpoint) {
  if (!config_path.empty()) return parse_config(config_path);
  const auto sibling = checkpoint.parent_path() / "run.cfg";
  if (std::filesystem::exists(sibling)) return parse_config(sibling);
  return RunConfig{};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  static const std::set<std::string> commands = {"train", "eval", "render", "sweep"};
  if (argc < 2) {
    err << kUsage;
    return 2;
  }
  const std::string first = argv[1];
  if (first == "-h" || first == "--help") {
    out << kUsage;
    return 0;
  }
  if (!commands.count(first)) {
    err << "unknown command '" << first << "'\n" << kUsage;
    return 2;
  }

  CLI::App app{"Coach-assisted multi-agent training with agent crashes", "coachmarl"};
  app.require_subcommand(1);

  std::string config_path, out_path, trajectory_path, rates_text, betas_text, rhos_text, seeds_text;
  std::string behavior_text, forced_text, trajectory_out;
  std::vector<std::string> checkpoints;
  std::uint64_t seed = 0;
  int episodes = 0;

  auto* train = app.add_subcommand("train", "Run the coach training loop");
  train->add_option("--config", config_path, "Run config file")->required();
  auto* train_seed = train->add_option("--seed", seed, "Override trainer.seed");
  train->add_option("--out", out_path, "Output directory");

  auto* eval = app.add_subcommand("eval", "Greedy test matrix over crash rates");
  eval->add_option("--checkpoint", checkpoints, "Checkpoint (repeat for one per training seed)")->required();
  eval->add_option("--config", config_path, "Run config (default: run.cfg next to the checkpoint)");
  eval->add_option("--rates", rates_text, "Comma-separated crash rates");
  auto* eval_episodes = eval->add_option("--episodes", episodes, "Episodes per rate");
  eval->add_option("--behavior", behavior_text, "Crash behavior: freeze|random");
  auto* eval_seed = eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--out", out_path, "CSV output file (default: stdout)");
  eval->add_option("--forced-crash", forced_text, "Crash exactly these agent indices in every episode");
  eval->add_option("--trajectory-out", trajectory_out, "Write one greedy episode as a trajectory dump");

  auto* render = app.add_subcommand("render", "ASCII render of a trajectory dump");
  render->add_option("--trajectory", trajectory_path, "Trajectory JSON file")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Adaptive-coach (beta, rho) grid search");
  sweep_cmd->add_option("--config", config_path, "Base run config")->required();
  sweep_cmd->add_option("--betas", betas_text, "Comma-separated thresholds")->required();
  sweep_cmd->add_option("--rhos", rhos_text, "Comma-separated step sizes")->required();
  sweep_cmd->add_option("--seeds", seeds_text, "Comma-separated training seeds")->required();
  sweep_cmd->add_option("--out", out_path, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) {
      RunConfig config = parse_config(config_path);
      if (*train_seed) config.trainer.seed = seed;
      if (out_path.empty()) {
        out_path = "runs/" + std::filesystem::path(config_path).stem().string() + "-seed" +
                   std::to_string(config.trainer.seed);
      }
      const TrainingResult result = run_training(config, out_path);
      const auto& last = result.log.back();
      out << "trained " << last.env_steps << " steps in " << result.log.size() << " coach rounds; final alpha "
          << last.alpha << ", e " << last.e << "; artifacts in " << out_path << "\n";
      return 0;
    }

    if (*eval) {
      const RunConfig config = config_for_checkpoint(config_path, checkpoints.front());
      const CrashBehavior behavior =
          behavior_text.empty() ? config.trainer.crash_behavior : crash_behavior_from_string(behavior_text);
      if (!*eval_episodes) episodes = config.trainer.test_episodes;
      if (episodes < 1) throw ParameterError("--episodes must be at least 1");
      if (!*eval_seed) seed = 1;
      std::vector<Policy> policies;
      for (const auto& path : checkpoints) {
        const LearnerParams params = load_checkpoint(path);
        if (params.layout != input_layout_for(config.env, config.learner)) {
          throw ConfigError("checkpoint " + path + " does not fit the environment in the config");
        }
        policies.push_back(policy_of(params));
      }

      std::string table;
      CrashMask forced = CrashMask::none(config.env.agent_starts.size());
      if (!forced_text.empty()) {
        std::vector<bool> bits(config.env.agent_starts.size(), false);
        for (int i : parse_list<int>(forced_text, "--forced-crash")) {
          if (i < 0 || i >= static_cast<int>(bits.size())) throw ParameterError("--forced-crash: no agent " + std::to_string(i));
          bits[i] = true;
        }
        forced = CrashMask(bits);
        table = "checkpoint,forced_crash,episodes,success_rate,mean_return\n";
        for (std::size_t k = 0; k < policies.size(); ++k) {
          const EvalReport r = evaluate_forced(policies[k], config.env, forced, behavior, episodes, seed);
          std::ostringstream row;
          row << checkpoints[k] << "," << forced_text << "," << r.episodes << "," << r.success_rate << ","
              << r.mean_return << "\n";
          table += row.str();
        }
      } else {
        const auto rates = rates_text.empty() ? config.trainer.test_rates : parse_rates(rates_text, "--rates");
        table = format_test_matrix(test_matrix(policies, config.env, rates, episodes, behavior, seed));
      }
      if (out_path.empty()) out << table;
      else write_text_file(out_path, table);

      if (!trajectory_out.empty()) {
        write_trajectory(rollout_trajectory(config.env, policies.front(), forced, behavior, seed), trajectory_out);
      }
      return 0;
    }

    if (*render) {
      out << render_trajectory_ascii(read_trajectory(trajectory_path));
      return 0;
    }

    if (*sweep_cmd) {
      const RunConfig config = parse_config(config_path);
      const auto betas = parse_rates(betas_text, "--betas");
      const auto rhos = parse_rates(rhos_text, "--rhos");
      const auto seeds = parse_list<std::uint64_t>(seeds_text, "--seeds");
      if (out_path.empty()) out_path = "runs/sweep-" + std::filesystem::path(config_path).stem().string();
      const auto cells = sweep(config, betas, rhos, seeds, out_path);
      out << format_sweep(cells);
      return 0;
    }
  } catch (const std::exception& e) {
    std::string what = e.what();
    for (char& c : what) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << what << "\n";
    return 1;
  }
  err << kUsage;
  return 2;
}

}  // namespace coachmarl
