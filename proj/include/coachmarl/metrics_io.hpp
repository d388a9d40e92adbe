#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "coachmarl/env_core.hpp"
#include "coachmarl/gridworld.hpp"
#include "coachmarl/learner/learner.hpp"

namespace coachmarl {

struct TrainingLogRow {
  long round = 0;
  long env_steps = 0;
  double alpha = 0.0;
  double e = 0.0;
  double loss = 0.0;
  double epsilon = 0.0;
  double wall_ms = 0.0;
  friend bool operator==(const TrainingLogRow&, const TrainingLogRow&) = default;
};

inline constexpr const char* kTrainingLogHeader = "round,env_steps,alpha,e,loss,epsilon,wall_ms";

/// Numbers use 17 significant digits so every double survives the round trip.
void write_training_log(const std::vector<TrainingLogRow>& rows, const std::filesystem::path& path);
std::string format_training_log(const std::vector<TrainingLogRow>& rows);
/// Throws ParseError with the 1-based line number on malformed input.
std::vector<TrainingLogRow> read_training_log(const std::filesystem::path& path);
std::vector<TrainingLogRow> parse_training_log(const std::string& text);

/// Test-matrix cell: success across checkpoints (one per training seed) at one crash rate.
struct MatrixCell {
  double crash_rate = 0.0;
  int checkpoints = 0;
  int episodes = 0;
  double success_mean = 0.0;
  double success_std = 0.0;  // population std across checkpoints
  double return_mean = 0.0;
  std::vector<double> per_checkpoint;
};

struct SweepCell {
  double beta = 0.0;
  double rho = 0.0;
  std::vector<MatrixCell> cells;
};

std::string format_test_matrix(const std::vector<MatrixCell>& cells);
std::string format_sweep(const std::vector<SweepCell>& cells);

/// Versioned binary checkpoint: magic, version, tensor manifest (name, rows, cols),
/// then every tensor as row-major little-endian float64 in manifest order.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const LearnerParams& params, const std::filesystem::path& path);
/// Shapes come from the manifest; throws CheckpointError on a bad header or truncated payload.
LearnerParams load_checkpoint(const std::filesystem::path& path);
/// As above, and additionally rejects files whose tensor shapes differ from `like`.
LearnerParams load_checkpoint(const std::filesystem::path& path, const LearnerParams& like);

/// Everything needed to replay and draw one episode on the grid world.
struct TrajectoryDump {
  GridButtonsConfig layout;
  CrashMask mask;
  std::vector<std::vector<Cell>> positions;  // T+1 entries, starting with the start cells
  std::vector<JointAction> actions;          // executed actions, T entries
  std::vector<double> rewards;
  std::vector<int> touched_at_step;  // per button: 1-based step of first touch, 0 if never
  bool success = false;
  double episode_return = 0.0;

  int length() const noexcept { return static_cast<int>(actions.size()); }
  friend bool operator==(const TrajectoryDump&, const TrajectoryDump&) = default;
};

std::string trajectory_to_json(const TrajectoryDump& dump);
TrajectoryDump trajectory_from_json(const std::string& text);
void write_trajectory(const TrajectoryDump& dump, const std::filesystem::path& path);
TrajectoryDump read_trajectory(const std::filesystem::path& path);

/// Feeds the recorded actions back through the grid world; true iff every position,
/// reward and the final outcome match the dump exactly.
bool replay_matches(const TrajectoryDump& dump);

/// ASCII raster of the episode plus a legend. Digits mark start cells, lowercase
/// letters ('a' for agent 0, ...) the cells an agent moved through, '+' cells shared
/// by several paths, '@' touched buttons and '#' untouched ones.
std::string render_trajectory_ascii(const TrajectoryDump& dump);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace coachmarl
