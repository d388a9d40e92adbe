#include "coachmarl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Entry {
  std::string value;
  std::size_t line;
};

class Section {
 public:
  Section(std::string name, std::map<std::string, Entry> entries) : name_(std::move(name)), entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    throw ParseError(it != entries_.end() ? it->second.line : 0, "key '" + name_ + "." + key + "': " + what);
  }

  const std::string& raw(const std::string& key) const { return entries_.at(key).value; }

  template <class T>
  T number(const std::string& key, T fallback) const {
    if (!has(key)) return fallback;
    const std::string& text = raw(key);
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
      fail(key, "expected a number, got '" + text + "'");
    }
    return value;
  }

  double real(const std::string& key, double fallback, double lo, double hi) const {
    const double v = number<double>(key, fallback);
    if (!(v >= lo && v <= hi)) {
      fail(key, "value " + shortest(v) + " outside [" + shortest(lo) + ", " + shortest(hi) + "]");
    }
    return v;
  }

  double probability(const std::string& key, double fallback) const { return real(key, fallback, 0.0, 1.0); }

  long integer(const std::string& key, long fallback, long lo) const {
    const long v = number<long>(key, fallback);
    if (v < lo) fail(key, "value " + std::to_string(v) + " is below the minimum " + std::to_string(lo));
    return v;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = raw(key);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(key, "expected true or false, got '" + v + "'");
  }

  std::string word(const std::string& key, const std::string& fallback, std::set<std::string> allowed) const {
    if (!has(key)) return fallback;
    const std::string& v = raw(key);
    if (!allowed.count(v)) {
      std::string options;
      for (const auto& a : allowed) options += (options.empty() ? "" : "|") + a;
      fail(key, "expected one of " + options + ", got '" + v + "'");
    }
    return v;
  }

  std::vector<Cell> cells(const std::string& key) const {
    std::vector<Cell> out;
    std::istringstream groups(raw(key));
    std::string group;
    while (std::getline(groups, group, ';')) {
      std::istringstream xy(group);
      Cell c;
      std::string extra;
      if (!(xy >> c.x >> c.y) || (xy >> extra)) fail(key, "expected 'x y; x y; ...', got '" + raw(key) + "'");
      out.push_back(c);
    }
    if (out.empty()) fail(key, "needs at least one 'x y' pair");
    return out;
  }

  std::vector<double> probabilities(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::istringstream items(raw(key));
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size() || item.empty()) {
        fail(key, "cannot parse list entry '" + item + "'");
      }
      if (!(v >= 0.0 && v <= 1.0)) fail(key, "entry " + item + " outside [0, 1]");
      out.push_back(v);
    }
    return out;
  }

 private:
  std::string name_;
  std::map<std::string, Entry> entries_;
};

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"env",
       {"layout", "width", "height", "agents", "buttons", "max_steps", "n_agents", "n_buttons", "grid_size",
        "layout_seed", "step_reward", "button_reward", "discount"}},
      {"coach", {"strategy", "alpha", "delta_alpha", "alpha_max", "beta", "rho", "alpha_init"}},
      {"learner",
       {"mixer", "hidden", "embed", "prev_action", "mask_crashed", "crash_aware_targets", "learning_rate", "rms_alpha", "rms_eps",
        "grad_clip", "batch_size", "buffer_capacity", "target_period", "train_interval", "epsilon_start",
        "epsilon_finish", "epsilon_anneal_fraction"}},
      {"trainer",
       {"total_steps", "eval_every", "eval_episodes", "crash_behavior", "resample", "coach_eval", "seed",
        "test_rates", "test_episodes", "log_wall_clock"}},
  };
  return keys;
}

constexpr double kHuge = 1e300;

GridButtonsConfig parse_env(const Section& s) {
  const std::string layout = s.word("layout", "desk", {"desk", "corners", "parametric", "custom"});
  GridButtonsConfig env;
  if (layout == "desk") env = desk_layout();
  if (layout == "corners") env = corners_layout();
  if (layout == "parametric") {
    for (const char* key : {"agents", "buttons", "width", "height"}) {
      if (s.has(key)) s.fail(key, "not allowed with layout = parametric (use grid_size)");
    }
    const long n_agents = s.integer("n_agents", 8, 1);
    const long n_buttons = s.integer("n_buttons", 8, 1);
    const long grid = s.integer("grid_size", 12, 1);
    const long steps = s.integer("max_steps", 30, 1);
    const long seed = s.integer("layout_seed", 7, 0);
    try {
      env = make_parametric_env(static_cast<int>(n_agents), static_cast<int>(n_buttons), static_cast<int>(grid),
                                static_cast<int>(steps), static_cast<std::uint64_t>(seed));
    } catch (const ConfigError& e) {
      s.fail("grid_size", e.what());
    }
  } else {
    for (const char* key : {"n_agents", "n_buttons", "grid_size", "layout_seed"}) {
      if (s.has(key)) s.fail(key, "only valid with layout = parametric");
    }
  }
  if (layout == "custom") {
    if (!s.has("agents")) throw ParseError(0, "key 'env.agents': required with layout = custom");
    if (!s.has("buttons")) throw ParseError(0, "key 'env.buttons': required with layout = custom");
  }
  env.width = static_cast<int>(s.integer("width", env.width, 1));
  env.height = static_cast<int>(s.integer("height", env.height, 1));
  if (s.has("agents")) env.agent_starts = s.cells("agents");
  if (s.has("buttons")) env.button_positions = s.cells("buttons");
  env.max_steps = static_cast<int>(s.integer("max_steps", env.max_steps, 1));
  env.step_reward = s.real("step_reward", env.step_reward, -kHuge, kHuge);
  env.button_reward = s.real("button_reward", env.button_reward, -kHuge, kHuge);
  env.discount = s.real("discount", env.discount, 0.0, 0.999999999999);
  for (const Cell& c : env.agent_starts) {
    if (!env.contains(c)) s.fail(s.has("agents") ? "agents" : "width", "agent start outside the grid");
  }
  for (const Cell& c : env.button_positions) {
    if (!env.contains(c)) s.fail(s.has("buttons") ? "buttons" : "width", "button outside the grid");
  }
  return env;
}

CoachStrategy parse_coach(const Section& s) {
  const std::string kind = s.word("strategy", "adaptive", {"fixed", "curriculum", "adaptive"});
  const std::map<std::string, std::set<std::string>> owned = {
      {"fixed", {"alpha"}}, {"curriculum", {"delta_alpha", "alpha_max"}}, {"adaptive", {"beta", "rho", "alpha_init"}}};
  for (const auto& [strategy, keys] : owned) {
    if (strategy == kind) continue;
    for (const auto& key : keys) {
      if (s.has(key)) s.fail(key, "does not apply to strategy = " + kind);
    }
  }
  const FixedRate fixed{s.probability("alpha", 0.0)};
  const CurriculumRate curriculum{s.probability("delta_alpha", CurriculumRate{}.delta_alpha),
                                  s.probability("alpha_max", CurriculumRate{}.alpha_max)};
  const AdaptiveRate adaptive{s.probability("beta", AdaptiveRate{}.beta), s.probability("rho", AdaptiveRate{}.rho),
                              s.probability("alpha_init", AdaptiveRate{}.alpha_init)};
  if (kind == "fixed") return fixed;
  if (kind == "curriculum") return curriculum;
  return adaptive;
}

LearnerConfig parse_learner(const Section& s) {
  LearnerConfig d;
  LearnerConfig c;
  c.mixer = mixer_kind_from_string(s.word("mixer", std::string(to_string(d.mixer)), {"vdn", "qmix"}));
  c.hidden = static_cast<int>(s.integer("hidden", d.hidden, 1));
  c.embed = static_cast<int>(s.integer("embed", d.embed, 1));
  c.include_prev_action = s.boolean("prev_action", d.include_prev_action);
  c.mask_crashed_agents = s.boolean("mask_crashed", d.mask_crashed_agents);
  c.crash_aware_targets = s.boolean("crash_aware_targets", d.crash_aware_targets);
  c.learning_rate = s.real("learning_rate", d.learning_rate, 1e-300, kHuge);
  c.rms_alpha = s.real("rms_alpha", d.rms_alpha, 0.0, 0.999999999999);
  c.rms_eps = s.real("rms_eps", d.rms_eps, 1e-300, kHuge);
  c.grad_clip = s.real("grad_clip", d.grad_clip, 0.0, kHuge);
  c.batch_size = static_cast<int>(s.integer("batch_size", d.batch_size, 1));
  c.buffer_capacity = static_cast<int>(s.integer("buffer_capacity", d.buffer_capacity, 1));
  c.target_period = static_cast<int>(s.integer("target_period", d.target_period, 1));
  c.train_interval = static_cast<int>(s.integer("train_interval", d.train_interval, 1));
  c.epsilon_start = s.probability("epsilon_start", d.epsilon_start);
  c.epsilon_finish = s.probability("epsilon_finish", d.epsilon_finish);
  c.epsilon_anneal_fraction = s.probability("epsilon_anneal_fraction", d.epsilon_anneal_fraction);
  if (c.buffer_capacity < c.batch_size) s.fail("buffer_capacity", "must be at least batch_size");
  return c;
}

TrainerConfig parse_trainer(const Section& s) {
  TrainerConfig d;
  TrainerConfig c;
  c.total_steps = s.integer("total_steps", d.total_steps, 1);
  c.eval_every = static_cast<int>(s.integer("eval_every", d.eval_every, 1));
  c.eval_episodes = static_cast<int>(s.integer("eval_episodes", d.eval_episodes, 1));
  c.crash_behavior =
      crash_behavior_from_string(s.word("crash_behavior", std::string(to_string(d.crash_behavior)), {"freeze", "random"}));
  c.resample = s.boolean("resample", d.resample);
  c.coach_eval_on_training = s.word("coach_eval", "greedy", {"greedy", "training"}) == "training";
  c.seed = s.number<std::uint64_t>("seed", d.seed);
  c.test_rates = s.probabilities("test_rates", d.test_rates);
  c.test_episodes = static_cast<int>(s.integer("test_episodes", d.test_episodes, 1));
  c.log_wall_clock = s.boolean("log_wall_clock", d.log_wall_clock);
  return c;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::string current;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.back() != ']') throw ParseError(line_no, "malformed section header '" + content + "'");
      current = trim(content.substr(1, content.size() - 2));
      if (!known_keys().count(current)) throw ParseError(line_no, "unknown section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value', got '" + content + "'");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (current.empty()) throw ParseError(line_no, "key '" + key + "' appears before any [section]");
    if (!known_keys().at(current).count(key)) {
      throw ParseError(line_no, "unknown key '" + current + "." + key + "'");
    }
    if (sections[current].count(key)) throw ParseError(line_no, "duplicate key '" + current + "." + key + "'");
    sections[current][key] = {value, line_no};
  }

  RunConfig config;
  config.env = parse_env(Section("env", sections["env"]));
  config.coach = parse_coach(Section("coach", sections["coach"]));
  config.learner = parse_learner(Section("learner", sections["learner"]));
  config.trainer = parse_trainer(Section("trainer", sections["trainer"]));
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw ParseError(0, e.what());
  }
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << file.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  auto cells = [](const std::vector<Cell>& v) {
    std::string s;
    for (const Cell& cell : v) s += (s.empty() ? "" : "; ") + std::to_string(cell.x) + " " + std::to_string(cell.y);
    return s;
  };
  auto flag = [](bool b) { return b ? "true" : "false"; };

  out << "[env]\n"
      << "layout = custom\n"
      << "width = " << c.env.width << "\n"
      << "height = " << c.env.height << "\n"
      << "agents = " << cells(c.env.agent_starts) << "\n"
      << "buttons = " << cells(c.env.button_positions) << "\n"
      << "max_steps = " << c.env.max_steps << "\n"
      << "step_reward = " << shortest(c.env.step_reward) << "\n"
      << "button_reward = " << shortest(c.env.button_reward) << "\n"
      << "discount = " << shortest(c.env.discount) << "\n\n";

  out << "[coach]\n";
  if (const auto* f = std::get_if<FixedRate>(&c.coach)) {
    out << "strategy = fixed\nalpha = " << shortest(f->alpha) << "\n";
  } else if (const auto* cu = std::get_if<CurriculumRate>(&c.coach)) {
    out << "strategy = curriculum\ndelta_alpha = " << shortest(cu->delta_alpha)
        << "\nalpha_max = " << shortest(cu->alpha_max) << "\n";
  } else {
    const auto& a = std::get<AdaptiveRate>(c.coach);
    out << "strategy = adaptive\nbeta = " << shortest(a.beta) << "\nrho = " << shortest(a.rho)
        << "\nalpha_init = " << shortest(a.alpha_init) << "\n";
  }
  out << "\n";

  const auto& l = c.learner;
  out << "[learner]\n"
      << "mixer = " << to_string(l.mixer) << "\n"
      << "hidden = " << l.hidden << "\n"
      << "embed = " << l.embed << "\n"
      << "prev_action = " << flag(l.include_prev_action) << "\n"
      << "mask_crashed = " << flag(l.mask_crashed_agents) << "\n"
      << "crash_aware_targets = " << flag(l.crash_aware_targets) << "\n"
      << "learning_rate = " << shortest(l.learning_rate) << "\n"
      << "rms_alpha = " << shortest(l.rms_alpha) << "\n"
      << "rms_eps = " << shortest(l.rms_eps) << "\n"
      << "grad_clip = " << shortest(l.grad_clip) << "\n"
      << "batch_size = " << l.batch_size << "\n"
      << "buffer_capacity = " << l.buffer_capacity << "\n"
      << "target_period = " << l.target_period << "\n"
      << "train_interval = " << l.train_interval << "\n"
      << "epsilon_start = " << shortest(l.epsilon_start) << "\n"
      << "epsilon_finish = " << shortest(l.epsilon_finish) << "\n"
      << "epsilon_anneal_fraction = " << shortest(l.epsilon_anneal_fraction) << "\n\n";

  const auto& t = c.trainer;
  std::string rates;
  for (double r : t.test_rates) rates += (rates.empty() ? "" : ",") + shortest(r);
  out << "[trainer]\n"
      << "total_steps = " << t.total_steps << "\n"
      << "eval_every = " << t.eval_every << "\n"
      << "eval_episodes = " << t.eval_episodes << "\n"
      << "crash_behavior = " << to_string(t.crash_behavior) << "\n"
      << "resample = " << flag(t.resample) << "\n"
      << "coach_eval = " << (t.coach_eval_on_training ? "training" : "greedy") << "\n"
      << "seed = " << t.seed << "\n"
      << "test_rates = " << rates << "\n"
      << "test_episodes = " << t.test_episodes << "\n"
      << "log_wall_clock = " << flag(t.log_wall_clock) << "\n";
  return out.str();
}

}  // namespace coachmarl
