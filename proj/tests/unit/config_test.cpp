#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "coachmarl/config.hpp"
#include "coachmarl/errors.hpp"

using namespace coachmarl;
namespace fs = std::filesystem;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

std::string error_text(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, EmptyFileGivesDefaults) {
  const RunConfig c = parse_config_text("");
  EXPECT_EQ(c, RunConfig{});
  EXPECT_EQ(c.env, desk_layout());
  EXPECT_EQ(parse_config_text("# only a comment\n\n"), RunConfig{});
}

TEST(Config, CornersFixture) {
  const RunConfig c = parse_config(fs::path(COACHMARL_SOURCE_DIR) / "configs" / "corners10.cfg");
  EXPECT_EQ(c.env, corners_layout());
  ASSERT_TRUE(std::holds_alternative<AdaptiveRate>(c.coach));
  EXPECT_EQ(std::get<AdaptiveRate>(c.coach).beta, 0.75);
  EXPECT_EQ(std::get<AdaptiveRate>(c.coach).rho, 0.01);
  EXPECT_EQ(c.trainer.crash_behavior, CrashBehavior::Freeze);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(COACHMARL_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(parse_config(entry.path()).validate()) << entry.path();
  }
}

TEST(Config, AllSectionsAndKeys) {
  const RunConfig c = parse_config_text(R"(
[env]
layout = custom
width = 4
height = 3
agents = 0 0; 3 2
buttons = 1 1
max_steps = 9
step_reward = -0.5
button_reward = 2
discount = 0.9
[coach]
strategy = curriculum
delta_alpha = 0.002
alpha_max = 0.2
[learner]
mixer = vdn
hidden = 16
embed = 8
prev_action = true
mask_crashed = yes
crash_aware_targets = false
learning_rate = 0.001
rms_alpha = 0.95
rms_eps = 1e-6
grad_clip = 5
batch_size = 4
buffer_capacity = 100
target_period = 50
train_interval = 2
epsilon_start = 0.9
epsilon_finish = 0.1
epsilon_anneal_fraction = 0.2
[trainer]
total_steps = 1000
eval_every = 10
eval_episodes = 4
crash_behavior = random
resample = false
coach_eval = training
seed = 17
test_rates = 0, 0.5
test_episodes = 16
log_wall_clock = true
)");
  EXPECT_EQ(c.env.width, 4);
  EXPECT_EQ(c.env.agent_starts, (std::vector<Cell>{{0, 0}, {3, 2}}));
  EXPECT_EQ(c.env.button_positions, (std::vector<Cell>{{1, 1}}));
  EXPECT_EQ(c.env.step_reward, -0.5);
  EXPECT_EQ(std::get<CurriculumRate>(c.coach), (CurriculumRate{0.002, 0.2}));
  EXPECT_EQ(c.learner.mixer, MixerKind::VdnSum);
  EXPECT_TRUE(c.learner.include_prev_action);
  EXPECT_TRUE(c.learner.mask_crashed_agents);
  EXPECT_FALSE(c.learner.crash_aware_targets);
  EXPECT_EQ(c.learner.rms_eps, 1e-6);
  EXPECT_EQ(c.learner.train_interval, 2);
  EXPECT_EQ(c.trainer.crash_behavior, CrashBehavior::Random);
  EXPECT_FALSE(c.trainer.resample);
  EXPECT_TRUE(c.trainer.coach_eval_on_training);
  EXPECT_EQ(c.trainer.seed, 17u);
  EXPECT_EQ(c.trainer.test_rates, (std::vector<double>{0.0, 0.5}));
  EXPECT_TRUE(c.trainer.log_wall_clock);
}

TEST(Config, ParametricLayout) {
  const RunConfig c = parse_config(fs::path(COACHMARL_SOURCE_DIR) / "configs" / "parametric8.cfg");
  EXPECT_EQ(c.env, make_parametric_env(8, 4, 8, 12, 7));
  EXPECT_THROW(parse_config_text("[env]\nlayout = parametric\nwidth = 5\n"), ParseError);
  EXPECT_THROW(parse_config_text("[env]\nlayout = parametric\nn_agents = 100\ngrid_size = 3\n"), ParseError);
}

TEST(Config, RangeViolationNamesKeyAndLine) {
  const std::string text = "[coach]\nstrategy = fixed\nalpha = 1.5\n";
  EXPECT_EQ(error_line(text), 3u);
  EXPECT_NE(error_text(text).find("coach.alpha"), std::string::npos) << error_text(text);
}

TEST(Config, Rejections) {
  EXPECT_EQ(error_line("[coach]\nstrategy = fixed\nbogus = 1\n"), 3u);
  EXPECT_NE(error_text("[coach]\nstrategy = fixed\nbogus = 1\n").find("coach.bogus"), std::string::npos);
  EXPECT_EQ(error_line("[nowhere]\n"), 1u);
  EXPECT_EQ(error_line("alpha = 0.1\n"), 1u);
  EXPECT_EQ(error_line("[learner]\nhidden = 4\nhidden = 8\n"), 3u);
  EXPECT_EQ(error_line("[learner]\nhidden = four\n"), 2u);
  EXPECT_EQ(error_line("[learner]\nhidden = 0\n"), 2u);
  EXPECT_EQ(error_line("[learner]\nprev_action = maybe\n"), 2u);
  EXPECT_EQ(error_line("[trainer]\ncrash_behavior = melt\n"), 2u);
  EXPECT_EQ(error_line("[trainer]\ntest_rates = 0.1, 2\n"), 2u);
  EXPECT_EQ(error_line("[env]\nlayout = custom\nagents = 0 0\nbuttons = 9 9\n"), 4u);
  EXPECT_EQ(error_line("[coach]\nstrategy = adaptive\nalpha = 0.1\n"), 3u);
  EXPECT_EQ(error_line("[env]\nno equals sign\n"), 2u);
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(parse_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, FileErrorsMentionPath) {
  const fs::path p = fs::temp_directory_path() / "coachmarl_bad.cfg";
  std::ofstream(p) << "[coach]\nstrategy = fixed\nalpha = 1.5\n";
  try {
    parse_config(p);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(p.string()), std::string::npos);
    EXPECT_NE(what.find("line 3"), std::string::npos);
    EXPECT_NE(what.find("coach.alpha"), std::string::npos);
  }
}

TEST(Config, SerializedFormReparsesEqual) {
  std::vector<RunConfig> cases(5);
  cases[1].env = corners_layout();
  cases[1].coach = FixedRate{0.1};
  cases[2].env = make_parametric_env(5, 3, 7, 25, 3);
  cases[2].coach = CurriculumRate{0.0015, 0.1};
  cases[2].learner.mixer = MixerKind::VdnSum;
  cases[2].trainer.crash_behavior = CrashBehavior::Random;
  cases[3].coach = AdaptiveRate{0.6, 0.05, 0.123456789012345};
  cases[3].learner.learning_rate = 1.0 / 3.0;
  cases[3].trainer.test_rates = {0.3, 0.1 + 0.2};
  cases[3].trainer.seed = 0xFFFFFFFFFFFFFFFFull;
  cases[4].env.step_reward = -0.1;
  cases[4].env.discount = 0.95;
  cases[4].learner.include_prev_action = true;
  cases[4].learner.crash_aware_targets = false;
  cases[4].trainer.coach_eval_on_training = true;
  for (const RunConfig& c : cases) {
    const std::string text = serialize_config(c);
    EXPECT_EQ(parse_config_text(text), c) << text;
    EXPECT_EQ(serialize_config(parse_config_text(text)), text);
  }
}
