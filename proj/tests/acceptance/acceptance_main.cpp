// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset, e.g. `acceptance 1 2 4`.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "coachmarl/coach.hpp"
#include "coachmarl/config.hpp"
#include "coachmarl/env_core.hpp"
#include "coachmarl/learner/learner.hpp"
#include "coachmarl/metrics_io.hpp"
#include "coachmarl/trainer.hpp"
#include "oracles.hpp"

using namespace coachmarl;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr std::uint64_t kMaxUlp = 1;
constexpr double kClosedFormTol = 1e-12;
constexpr double kTvTol = 0.01;
constexpr double kGradTol = 1e-4;
constexpr double kMonotoneTol = -1e-9;
constexpr double kFig2Gap = 0.30;
constexpr double kFig2NoCrash = 0.90;
constexpr int kSeedsNeeded = 4;
constexpr double kNonInferiorMargin = 0.05;  // adaptive may trail by at most this at the lowest rate

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "coachmarl_acceptance";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunConfig shipped(const std::string& name) { return parse_config(fs::path(COACHMARL_SOURCE_DIR) / "configs" / name); }

Verdict coach_arithmetic() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uint64_t worst = 0;
  for (int k = 0; k < 10000; ++k) {
    const double alpha = u(rng), e = u(rng), beta = u(rng), rho = u(rng), delta = 0.1 * u(rng), cap = u(rng);
    CoachState s;
    s.alpha_t = alpha;
    worst = std::max(worst, oracle::ulp_distance(next_crash_rate(FixedRate{alpha}, s, e), oracle::fixed_rule(alpha)));
    worst = std::max(worst, oracle::ulp_distance(next_crash_rate(AdaptiveRate{beta, rho, 0.0}, s, e),
                                                 oracle::adaptive_rule(alpha, e, beta, rho)));
    if (alpha <= cap) {
      worst = std::max(worst, oracle::ulp_distance(next_crash_rate(CurriculumRate{delta, cap}, s, e),
                                                   oracle::curriculum_rule(alpha, delta, cap)));
    }
  }
  double worst_closed = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const AdaptiveRate a{0.5, 0.001 + 0.5 * u(rng), u(rng)};
    for (bool above : {true, false}) {
      Coach coach(a);
      for (long t = 1; t <= 1000; ++t) {
        const double got = coach.observe(above ? 1.0 : 0.0);
        const double want = above ? 1.0 - std::pow(1.0 - a.rho, static_cast<double>(t)) * (1.0 - a.alpha_init)
                                  : std::pow(1.0 - a.rho, static_cast<double>(t)) * a.alpha_init;
        worst_closed = std::max(worst_closed, std::abs(got - want));
      }
    }
  }
  return {worst <= kMaxUlp && worst_closed <= kClosedFormTol,
          "max ulp " + std::to_string(worst) + " (<= 1), closed-form max error " + fmt(worst_closed) + " (<= 1e-12)"};
}

unsigned mask_bits(const CrashMask& m) {
  unsigned key = 0;
  for (std::size_t i = 0; i < m.size(); ++i) key |= static_cast<unsigned>(m[i]) << i;
  return key;
}

Verdict resampling() {
  Rng rng(derive_seed(7, "acceptance_resample"));
  bool caps_ok = true;
  double worst_tv = 0.0;
  for (unsigned n : {2u, 4u, 8u}) {
    for (double alpha : {0.05, 0.1, 0.5}) {
      const auto cap = static_cast<std::size_t>(std::ceil(n * alpha - 1e-9));
      std::map<unsigned, double> seen;
      const int draws = 100000;
      for (int k = 0; k < draws; ++k) {
        const CrashMask m = sample_crash_mask_resampled(n, alpha, rng);
        if (m.popcount() > cap) caps_ok = false;
        if (n <= 4) seen[mask_bits(m)] += 1.0 / draws;
      }
      if (n <= 4) {
        const double tv = oracle::total_variation(seen, oracle::truncated_bernoulli(n, alpha, static_cast<unsigned>(cap)));
        worst_tv = std::max(worst_tv, tv);
      }
    }
  }
  return {caps_ok && worst_tv < kTvTol,
          std::string("caps ") + (caps_ok ? "respected" : "VIOLATED") + ", worst TV " + fmt(worst_tv) + " (< 0.01)"};
}

Verdict gradients() {
  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> agents(1, 3), hidden(1, 6), embed(1, 4), state(1, 5), actions(2, 5), rows(1, 4);
  double worst = 0.0;
  int configs = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const MixerKind kind = trial % 2 ? MixerKind::QmixMono : MixerKind::VdnSum;
    const InputLayout layout{2, agents(rng), actions(rng), trial % 3 == 0};
    const int state_size = state(rng);
    LearnerConfig lc;
    lc.mixer = kind;
    lc.hidden = hidden(rng);
    lc.embed = embed(rng);
    lc.include_prev_action = layout.include_prev_action;
    Rng init(rng());
    LearnerParams p = make_learner_params(lc, layout, state_size, 0.9, init);
    Rng other(rng());
    p.target_agent = AgentNet(p.agent.shape(), other);
    if (kind == MixerKind::QmixMono) p.target_mixer = Mixer(p.mixer.shape(), other);
    const TransitionBatch batch = oracle::random_batch(layout, state_size, rows(rng), rng);
    const TdResult td = td_loss_and_grads(p, batch);
    auto loss = [&] { return td_loss_and_grads(p, batch).loss; };
    worst = std::max(worst, oracle::finite_difference_check(p.agent.parameters(), td.grads.agent, loss).worst_relative);
    if (kind == MixerKind::QmixMono) {
      worst = std::max(worst, oracle::finite_difference_check(p.mixer.parameters(), td.grads.mixer, loss).worst_relative);
    }
    ++configs;
  }
  return {configs >= 100 && worst <= kGradTol,
          std::to_string(configs) + " configurations, worst relative error " + fmt(worst) + " (<= 1e-4)"};
}

Verdict monotonic_mixing() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 1e300;
  for (int probe = 0; probe < 1000; ++probe) {
    Rng init(rng());
    const int n = 1 + probe % 4;
    const Mixer m({MixerKind::QmixMono, n, 3, 4}, init);
    Eigen::MatrixXd q(1, n), s(1, 3);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
    for (int i = 0; i < n; ++i) {
      const double h = 1e-5;
      Eigen::MatrixXd up = q, down = q;
      up(0, i) += h;
      down(0, i) -= h;
      worst = std::min(worst, (m.forward(up, s)[0] - m.forward(down, s)[0]) / (2 * h));
    }
  }
  int agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 3, actions = 2 + trial % 4;
    Rng init(rng());
    const Mixer m({MixerKind::QmixMono, n, 2, 3}, init);
    Eigen::MatrixXd table(n, actions), s(1, 2);
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
    std::vector<int> factored(n);
    for (int i = 0; i < n; ++i) table.row(i).maxCoeff(&factored[static_cast<std::size_t>(i)]);
    int combos = 1;
    for (int i = 0; i < n; ++i) combos *= actions;
    double best = -1e300;
    std::vector<int> best_joint;
    for (int code = 0; code < combos; ++code) {
      Eigen::MatrixXd q(1, n);
      std::vector<int> joint(n);
      for (int i = 0, rest = code; i < n; ++i, rest /= actions) {
        joint[static_cast<std::size_t>(i)] = rest % actions;
        q(0, i) = table(i, rest % actions);
      }
      const double v = m.forward(q, s)[0];
      if (v > best) best = v, best_joint = joint;
    }
    agree += best_joint == factored;
  }
  return {worst >= kMonotoneTol && agree == 100,
          "min dQtot/dQi " + fmt(worst) + " (>= -1e-9), argmax agreement " + std::to_string(agree) + "/100"};
}

// Trained runs are shared between criteria 5 and 7.
std::map<std::string, TrainingResult> trained;

const TrainingResult& train_once(const std::string& tag, const RunConfig& config) {
  auto it = trained.find(tag);
  if (it != trained.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  TrainingResult r = run_training(config, work_dir() / tag);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "  trained " << tag << " in " << fmt(std::round(secs)) << " s\n";
  return trained.emplace(tag, std::move(r)).first->second;
}

RunConfig with_seed(RunConfig c, std::uint64_t seed) {
  c.trainer.seed = seed;
  return c;
}

Verdict desk_robustness() {
  const RunConfig base = shipped("desk_baseline.cfg"), adapt = shipped("desk_adaptive.cfg");
  const std::size_t n = base.env.agent_starts.size();
  int good_seeds = 0;
  double no_crash_sum = 0.0;
  std::ostringstream per_seed;
  for (std::uint64_t s : kSeeds) {
    const Policy pb = policy_of(train_once("desk_baseline_seed" + std::to_string(s), with_seed(base, s)).params);
    const Policy pa = policy_of(train_once("desk_adaptive_seed" + std::to_string(s), with_seed(adapt, s)).params);
    // Success under a forced single crash, averaged over which agent is crashed.
    double sb = 0.0, sa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<bool> bits(n, false);
      bits[i] = true;
      sb += evaluate_forced(pb, base.env, CrashMask(bits), CrashBehavior::Freeze, 16, s).success_rate / n;
      sa += evaluate_forced(pa, adapt.env, CrashMask(bits), CrashBehavior::Freeze, 16, s).success_rate / n;
    }
    const double clean = evaluate(pa, adapt.env, 0.0, CrashBehavior::Freeze, 128, s).success_rate;
    no_crash_sum += clean;
    good_seeds += sa - sb >= kFig2Gap;
    per_seed << " [seed " << s << ": base " << fmt(sb) << " adapt " << fmt(sa) << " clean " << fmt(clean) << "]";

    // Agent 1 crashed, for side-by-side renders.
    std::vector<bool> second(n, false);
    second[std::min<std::size_t>(1, n - 1)] = true;
    write_text_file(work_dir() / ("desk_seed" + std::to_string(s) + "_baseline.txt"),
                    render_trajectory_ascii(rollout_trajectory(base.env, pb, CrashMask(second), CrashBehavior::Freeze, s)));
    write_text_file(work_dir() / ("desk_seed" + std::to_string(s) + "_adaptive.txt"),
                    render_trajectory_ascii(rollout_trajectory(adapt.env, pa, CrashMask(second), CrashBehavior::Freeze, s)));
  }
  const double no_crash = no_crash_sum / static_cast<double>(kSeeds.size());
  return {good_seeds >= kSeedsNeeded && no_crash >= kFig2NoCrash,
          "gap >= 0.30 in " + std::to_string(good_seeds) + "/5 seeds (need 4), adaptive no-crash success " +
              fmt(no_crash) + " (>= 0.9);" + per_seed.str()};
}

Verdict rate_trend() {
  RunConfig adapt = shipped("parametric8.cfg");
  RunConfig base = adapt;
  base.coach = FixedRate{0.0};
  const auto& rates = adapt.trainer.test_rates;
  int good_seeds = 0;
  std::ostringstream per_seed;
  for (std::uint64_t s : kSeeds) {
    const Policy pb = policy_of(train_once("param8_baseline_seed" + std::to_string(s), with_seed(base, s)).params);
    const Policy pa = policy_of(train_once("param8_adaptive_seed" + std::to_string(s), with_seed(adapt, s)).params);
    const auto cb = test_matrix({pb}, base.env, rates, adapt.trainer.test_episodes, CrashBehavior::Freeze, s);
    const auto ca = test_matrix({pa}, adapt.env, rates, adapt.trainer.test_episodes, CrashBehavior::Freeze, s);
    const bool low_ok = ca.front().success_mean >= cb.front().success_mean - kNonInferiorMargin;
    const bool high_ok = ca.back().success_mean > cb.back().success_mean;
    good_seeds += low_ok && high_ok;
    per_seed << " [seed " << s << ":";
    for (std::size_t r = 0; r < rates.size(); ++r) {
      per_seed << " " << fmt(rates[r]) << " base " << fmt(cb[r].success_mean) << " adapt " << fmt(ca[r].success_mean);
    }
    per_seed << "]";
  }
  return {good_seeds >= kSeedsNeeded,
          "non-inferior (margin 0.05) at lowest rate and strictly higher at highest rate in " +
              std::to_string(good_seeds) + "/5 seeds (need 4);" + per_seed.str()};
}

Verdict determinism() {
  const RunConfig c = with_seed(shipped("desk_adaptive.cfg"), 1);
  train_once("desk_adaptive_seed1", c);
  train_once("determinism_repeat", c);
  const fs::path a = work_dir() / "desk_adaptive_seed1", b = work_dir() / "determinism_repeat";
  const bool log_same = read_text_file(a / "training_log.csv") == read_text_file(b / "training_log.csv");
  const bool ckpt_same = read_text_file(a / "final.ckpt") == read_text_file(b / "final.ckpt");
  return {log_same && ckpt_same, std::string("training log ") + (log_same ? "identical" : "DIFFERS") + ", checkpoint " +
                                     (ckpt_same ? "identical" : "DIFFERS")};
}

Verdict persistence() {
  RunConfig c = shipped("desk_adaptive.cfg");
  c.trainer.total_steps = 2000;
  c.trainer.eval_every = 10;
  c.learner.batch_size = 4;
  const fs::path dir = work_dir() / "persistence";
  const TrainingResult r = run_training(c, dir);

  const std::string bytes = read_text_file(dir / "final.ckpt");
  save_checkpoint(load_checkpoint(dir / "final.ckpt"), dir / "again.ckpt");
  const bool ckpt_ok = read_text_file(dir / "again.ckpt") == bytes;

  const bool csv_ok = read_training_log(dir / "training_log.csv") == r.log;

  int replays = 0, replay_ok = 0;
  const Policy p = policy_of(r.params);
  for (const auto& bits : {std::vector<bool>{false, false}, std::vector<bool>{true, false}, std::vector<bool>{false, true}}) {
    for (CrashBehavior b : {CrashBehavior::Freeze, CrashBehavior::Random}) {
      const TrajectoryDump dump = rollout_trajectory(c.env, p, CrashMask(bits), b, 99);
      write_trajectory(dump, dir / "t.json");
      const TrajectoryDump back = read_trajectory(dir / "t.json");
      ++replays;
      replay_ok += replay_matches(back) && back.rewards == dump.rewards;
    }
  }
  return {ckpt_ok && csv_ok && replay_ok == replays,
          std::string("checkpoint ") + (ckpt_ok ? "bitwise" : "DIFFERS") + ", csv " + (csv_ok ? "equal" : "DIFFERS") +
              ", trajectory replays " + std::to_string(replay_ok) + "/" + std::to_string(replays)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"coach arithmetic", coach_arithmetic}, {"re-sampling cap and distribution", resampling},
      {"gradient correctness", gradients},    {"monotonic mixing", monotonic_mixing},
      {"crash robustness on the desk task", desk_robustness}, {"crash-rate trend on the 8-agent task", rate_trend},
      {"determinism", determinism},           {"persistence round trips", persistence},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[k].first << "): " << v.detail
              << " [" << fmt(std::round(secs * 10) / 10) << " s]" << std::endl;
    all = all && v.pass;
  }
  std::cout << "artifacts in " << work_dir().string() << std::endl;
  return all ? 0 : 1;
}
