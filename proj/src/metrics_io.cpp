#include "coachmarl/metrics_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& text, std::size_t line, const char* column) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError(line, std::string("column '") + column + "': cannot parse '" + text + "'");
  }
  return value;
}

// --- checkpoint helpers ---

constexpr char kMagic[8] = {'C', 'M', 'A', 'R', 'L', 'C', 'K', '\0'};

template <class U>
void put_le(std::string& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <class U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

struct NamedSets {
  ParameterSet agent, mixer, target_agent, target_mixer, meta;
};

void append_with_prefix(std::vector<Tensor>& out, const ParameterSet& set, const std::string& prefix) {
  for (const auto& t : set) out.push_back({prefix + t.name, t.value});
}

}  // namespace

// ---------------------------------------------------------------- training log

std::string format_training_log(const std::vector<TrainingLogRow>& rows) {
  std::string out = std::string(kTrainingLogHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.round) + "," + std::to_string(r.env_steps) + "," + fmt17(r.alpha) + "," + fmt17(r.e) +
           "," + fmt17(r.loss) + "," + fmt17(r.epsilon) + "," + fmt17(r.wall_ms) + "\n";
  }
  return out;
}

void write_training_log(const std::vector<TrainingLogRow>& rows, const std::filesystem::path& path) {
  write_text_file(path, format_training_log(rows));
}

std::vector<TrainingLogRow> parse_training_log(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrainingLogHeader) throw ParseError(1, "unexpected header '" + line + "'");
  std::vector<TrainingLogRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) {
      throw ParseError(line_no, "expected 7 fields, found " + std::to_string(f.size()));
    }
    TrainingLogRow r;
    r.round = parse_number<long>(f[0], line_no, "round");
    r.env_steps = parse_number<long>(f[1], line_no, "env_steps");
    r.alpha = parse_number<double>(f[2], line_no, "alpha");
    r.e = parse_number<double>(f[3], line_no, "e");
    r.loss = parse_number<double>(f[4], line_no, "loss");
    r.epsilon = parse_number<double>(f[5], line_no, "epsilon");
    r.wall_ms = parse_number<double>(f[6], line_no, "wall_ms");
    if (!rows.empty() && r.round <= rows.back().round) throw ParseError(line_no, "rounds must strictly increase");
    if (!(r.alpha >= 0.0 && r.alpha <= 1.0)) throw ParseError(line_no, "alpha outside [0, 1]");
    rows.push_back(r);
  }
  return rows;
}

std::vector<TrainingLogRow> read_training_log(const std::filesystem::path& path) {
  return parse_training_log(read_text_file(path));
}

// ---------------------------------------------------------------- tables

std::string format_test_matrix(const std::vector<MatrixCell>& cells) {
  std::string out = "crash_rate,checkpoints,episodes,success_mean,success_std,return_mean\n";
  for (const auto& c : cells) {
    out += fmt17(c.crash_rate) + "," + std::to_string(c.checkpoints) + "," + std::to_string(c.episodes) + "," +
           fmt17(c.success_mean) + "," + fmt17(c.success_std) + "," + fmt17(c.return_mean) + "\n";
  }
  return out;
}

std::string format_sweep(const std::vector<SweepCell>& sweep) {
  std::string out = "beta,rho,crash_rate,checkpoints,episodes,success_mean,success_std,return_mean\n";
  for (const auto& s : sweep) {
    for (const auto& c : s.cells) {
      out += fmt17(s.beta) + "," + fmt17(s.rho) + "," + fmt17(c.crash_rate) + "," + std::to_string(c.checkpoints) +
             "," + std::to_string(c.episodes) + "," + fmt17(c.success_mean) + "," + fmt17(c.success_std) + "," +
             fmt17(c.return_mean) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

void save_checkpoint(const LearnerParams& params, const std::filesystem::path& path) {
  std::vector<Tensor> tensors;
  append_with_prefix(tensors, params.agent.parameters(), "");
  append_with_prefix(tensors, params.mixer.parameters(), "");
  append_with_prefix(tensors, params.target_agent.parameters(), "target.");
  append_with_prefix(tensors, params.target_mixer.parameters(), "target.");
  const auto& l = params.layout;
  Eigen::MatrixXd layout(1, 4);
  layout << l.observation_size, l.n_agents, l.action_count, l.include_prev_action ? 1.0 : 0.0;
  Eigen::MatrixXd scalars(1, 2);
  scalars << params.gamma, static_cast<double>(params.updates);
  tensors.push_back({"meta.layout", layout});
  tensors.push_back({"meta.scalars", scalars});

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
  }
  for (const auto& t : tensors) {
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(t.value(r, c)));
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw CheckpointError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LearnerParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  Reader in(std::move(bytes));

  if (in.get_bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) {
    throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
  }
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.get_le<std::uint32_t>("tensor count");
  struct Entry {
    std::string name;
    std::uint64_t rows, cols;
  };
  std::vector<Entry> manifest;
  std::uint64_t payload = 0;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = in.get_le<std::uint32_t>("name length");
    if (len > 4096) throw CheckpointError("corrupt manifest (name length " + std::to_string(len) + ")");
    Entry e{in.get_bytes(len, "tensor name"), in.get_le<std::uint64_t>("rows"), in.get_le<std::uint64_t>("cols")};
    if (e.rows > (1u << 24) || e.cols > (1u << 24)) throw CheckpointError("corrupt manifest shape for " + e.name);
    payload += e.rows * e.cols * 8;
    manifest.push_back(std::move(e));
  }
  if (in.remaining() != payload) {
    throw CheckpointError("checkpoint payload holds " + std::to_string(in.remaining()) + " bytes, manifest needs " +
                          std::to_string(payload) + (in.remaining() < payload ? " (truncated)" : ""));
  }

  NamedSets sets;
  for (const auto& e : manifest) {
    ParameterSet* target = nullptr;
    std::string name = e.name;
    const bool is_target = name.starts_with("target.");
    if (is_target) name = name.substr(7);
    if (name.starts_with("agent.")) target = is_target ? &sets.target_agent : &sets.agent;
    else if (name.starts_with("mixer.")) target = is_target ? &sets.target_mixer : &sets.mixer;
    else if (name.starts_with("meta.") && !is_target) target = &sets.meta;
    else throw CheckpointError("unknown tensor '" + e.name + "' in manifest");
    const std::size_t idx = target->add(name, static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
    auto& m = target->value(idx);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(in.get_le<std::uint64_t>("payload"));
  }

  if (sets.meta.size() != 2 || sets.meta[0].name != "meta.layout" || sets.meta.value(0).size() != 4 ||
      sets.meta[1].name != "meta.scalars" || sets.meta.value(1).size() != 2) {
    throw CheckpointError("checkpoint metadata missing or malformed");
  }
  LearnerParams p;
  const auto& layout = sets.meta.value(0);
  p.layout.observation_size = static_cast<int>(layout(0, 0));
  p.layout.n_agents = static_cast<int>(layout(0, 1));
  p.layout.action_count = static_cast<int>(layout(0, 2));
  p.layout.include_prev_action = layout(0, 3) != 0.0;
  p.gamma = sets.meta.value(1)(0, 0);
  p.updates = static_cast<long>(sets.meta.value(1)(0, 1));
  try {
    p.agent = AgentNet::from_parameters(std::move(sets.agent));
    p.target_agent = AgentNet::from_parameters(std::move(sets.target_agent));
    p.mixer = Mixer::from_parameters(std::move(sets.mixer), p.layout.n_agents);
    p.target_mixer = Mixer::from_parameters(std::move(sets.target_mixer), p.layout.n_agents);
  } catch (const ParameterError& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
  if (p.agent.shape() != p.target_agent.shape() || p.mixer.shape() != p.target_mixer.shape() ||
      p.agent.shape().input_size != p.layout.width() || p.agent.shape().action_count != p.layout.action_count) {
    throw CheckpointError("checkpoint tensors disagree with its layout metadata");
  }
  return p;
}

LearnerParams load_checkpoint(const std::filesystem::path& path, const LearnerParams& like) {
  LearnerParams p = load_checkpoint(path);
  const bool same = p.layout == like.layout && p.agent.parameters().same_shapes(like.agent.parameters()) &&
                    p.mixer.parameters().same_shapes(like.mixer.parameters());
  if (!same) throw CheckpointError("checkpoint " + path.string() + " does not match the expected network shapes");
  return p;
}

// ---------------------------------------------------------------- trajectories

namespace {

nlohmann::json cells_json(const std::vector<Cell>& cells) {
  nlohmann::json out = nlohmann::json::array();
  for (const Cell& c : cells) out.push_back({c.x, c.y});
  return out;
}

std::vector<Cell> cells_from(const nlohmann::json& j) {
  std::vector<Cell> out;
  for (const auto& c : j) out.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
  return out;
}

}  // namespace

std::string trajectory_to_json(const TrajectoryDump& d) {
  nlohmann::json j;
  j["layout"] = {{"width", d.layout.width},
                 {"height", d.layout.height},
                 {"agent_starts", cells_json(d.layout.agent_starts)},
                 {"buttons", cells_json(d.layout.button_positions)},
                 {"max_steps", d.layout.max_steps},
                 {"step_reward", d.layout.step_reward},
                 {"button_reward", d.layout.button_reward},
                 {"noop_action", d.layout.noop_action},
                 {"discount", d.layout.discount}};
  j["crash_mask"] = d.mask.bits();
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& p : d.positions) steps.push_back(cells_json(p));
  j["positions"] = steps;
  j["actions"] = d.actions;
  j["rewards"] = d.rewards;
  j["touched_at_step"] = d.touched_at_step;
  j["success"] = d.success;
  j["return"] = d.episode_return;
  return j.dump(1);
}

TrajectoryDump trajectory_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TrajectoryDump d;
    const auto& l = j.at("layout");
    d.layout.width = l.at("width").get<int>();
    d.layout.height = l.at("height").get<int>();
    d.layout.agent_starts = cells_from(l.at("agent_starts"));
    d.layout.button_positions = cells_from(l.at("buttons"));
    d.layout.max_steps = l.at("max_steps").get<int>();
    d.layout.step_reward = l.at("step_reward").get<double>();
    d.layout.button_reward = l.at("button_reward").get<double>();
    d.layout.noop_action = l.at("noop_action").get<int>();
    d.layout.discount = l.at("discount").get<double>();
    d.layout.validate();
    d.mask = CrashMask(j.at("crash_mask").get<std::vector<bool>>());
    for (const auto& p : j.at("positions")) d.positions.push_back(cells_from(p));
    d.actions = j.at("actions").get<std::vector<JointAction>>();
    d.rewards = j.at("rewards").get<std::vector<double>>();
    d.touched_at_step = j.at("touched_at_step").get<std::vector<int>>();
    d.success = j.at("success").get<bool>();
    d.episode_return = j.at("return").get<double>();
    if (d.positions.size() != d.actions.size() + 1 || d.rewards.size() != d.actions.size() ||
        d.mask.size() != d.layout.agent_starts.size() ||
        d.touched_at_step.size() != d.layout.button_positions.size()) {
      throw ConfigError("trajectory arrays have inconsistent lengths");
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed trajectory: ") + e.what());
  }
}

void write_trajectory(const TrajectoryDump& dump, const std::filesystem::path& path) {
  write_text_file(path, trajectory_to_json(dump));
}

TrajectoryDump read_trajectory(const std::filesystem::path& path) { return trajectory_from_json(read_text_file(path)); }

bool replay_matches(const TrajectoryDump& dump) {
  GridState state = initial_state(dump.layout);
  if (dump.positions.empty() || state.agent_positions != dump.positions.front()) return false;
  double total = 0.0;
  std::vector<int> touched(dump.layout.button_positions.size(), 0);
  for (int t = 0; t < dump.length(); ++t) {
    GridStepOutcome out = grid_step(dump.layout, state, dump.actions[t]);
    for (std::size_t b = 0; b < touched.size(); ++b) {
      if (!state.button_touched[b] && out.next.button_touched[b]) touched[b] = t + 1;
    }
    state = std::move(out.next);
    if (state.agent_positions != dump.positions[t + 1] || out.reward != dump.rewards[t]) return false;
    total += out.reward;
    if (out.done && t + 1 != dump.length()) return false;
  }
  return touched == dump.touched_at_step && is_success(state) == dump.success && total == dump.episode_return;
}

std::string render_trajectory_ascii(const TrajectoryDump& d) {
  const int w = d.layout.width, h = d.layout.height;
  std::vector<std::string> grid(h, std::string(w, '.'));
  auto path_glyph = [](std::size_t agent) { return static_cast<char>('a' + agent % 26); };
  const std::size_t n = d.layout.agent_starts.size();

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 1; t < d.positions.size(); ++t) {
      const Cell c = d.positions[t][i];
      if (c == d.positions[0][i]) continue;
      char& g = grid[c.y][c.x];
      if (g == '.') g = path_glyph(i);
      else if (g != path_glyph(i)) g = '+';
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Cell c = d.layout.agent_starts[i];
    grid[c.y][c.x] = i < 10 ? static_cast<char>('0' + i) : '*';
  }
  for (std::size_t b = 0; b < d.layout.button_positions.size(); ++b) {
    const Cell c = d.layout.button_positions[b];
    grid[c.y][c.x] = d.touched_at_step[b] > 0 ? '@' : '#';
  }

  std::ostringstream out;
  const std::string border = "+" + std::string(w, '-') + "+";
  out << border << "\n";
  for (const auto& row : grid) out << "|" << row << "|\n";
  out << border << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    const Cell s = d.layout.agent_starts[i];
    const Cell e = d.positions.back()[i];
    out << "agent " << i << " (" << path_glyph(i) << "): start (" << s.x << "," << s.y << ") end (" << e.x << ","
        << e.y << ")" << (d.mask[i] ? " CRASHED" : "") << "\n";
  }
  for (std::size_t b = 0; b < d.layout.button_positions.size(); ++b) {
    const Cell c = d.layout.button_positions[b];
    out << "button " << b << " at (" << c.x << "," << c.y << "): ";
    if (d.touched_at_step[b] > 0) out << "touched at step " << d.touched_at_step[b] << "\n";
    else out << "untouched\n";
  }
  out << "outcome: " << (d.success ? "success" : "failure") << ", return " << d.episode_return << ", "
      << d.length() << " steps\n";
  return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ConfigError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw ConfigError("cannot open " + path.string() + " for writing");
  file << text;
  if (!file) throw ConfigError("failed writing " + path.string());
}

}  // namespace coachmarl
