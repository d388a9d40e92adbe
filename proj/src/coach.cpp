#include "coachmarl/coach.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coachmarl/errors.hpp"

namespace coachmarl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

void require_unit(double v, const char* name) {
  if (!unit_interval(v)) {
    throw ParameterError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

}  // namespace

void validate(const CoachStrategy& strategy) {
  std::visit(overloaded{
                 [](const FixedRate& s) { require_unit(s.alpha, "alpha"); },
                 [](const CurriculumRate& s) {
                   require_unit(s.delta_alpha, "delta_alpha");
                   require_unit(s.alpha_max, "alpha_max");
                 },
                 [](const AdaptiveRate& s) {
                   require_unit(s.beta, "beta");
                   require_unit(s.alpha_init, "alpha_init");
                   // rho == 0 is allowed: it degenerates to the fixed strategy.
                   require_unit(s.rho, "rho");
                 },
             },
             strategy);
}

std::string describe(const CoachStrategy& strategy) {
  std::ostringstream out;
  std::visit(overloaded{
                 [&](const FixedRate& s) { out << "fixed(alpha=" << s.alpha << ")"; },
                 [&](const CurriculumRate& s) {
                   out << "curriculum(delta_alpha=" << s.delta_alpha << ", alpha_max=" << s.alpha_max << ")";
                 },
                 [&](const AdaptiveRate& s) {
                   out << "adaptive(beta=" << s.beta << ", rho=" << s.rho << ", alpha_init=" << s.alpha_init
                       << ")";
                 },
             },
             strategy);
  return out.str();
}

double initial_alpha(const CoachStrategy& strategy) {
  return std::visit(overloaded{
                        [](const FixedRate& s) { return s.alpha; },
                        [](const CurriculumRate&) { return 0.0; },
                        [](const AdaptiveRate& s) { return s.alpha_init; },
                    },
                    strategy);
}

double next_crash_rate(const CoachStrategy& strategy, const CoachState& state, double e_t) {
  require_unit(e_t, "performance e_t");
  require_unit(state.alpha_t, "alpha_t");
  const double alpha = state.alpha_t;
  const double next = std::visit(
      overloaded{
          [&](const FixedRate&) { return alpha; },
          [&](const CurriculumRate& s) { return std::min(alpha + s.delta_alpha, s.alpha_max); },
          [&](const AdaptiveRate& s) {
            const double indicator = e_t >= s.beta ? 1.0 : 0.0;
            return alpha + s.rho * (indicator - alpha);
          },
      },
      strategy);
  return std::clamp(next, 0.0, 1.0);
}

double alpha_trajectory_closed_form(const AdaptiveRate& strategy, long t, bool always_above) {
  const double decay = std::pow(1.0 - strategy.rho, static_cast<double>(t));
  return always_above ? 1.0 - decay * (1.0 - strategy.alpha_init) : decay * strategy.alpha_init;
}

Coach::Coach(CoachStrategy strategy) : strategy_(std::move(strategy)) {
  validate(strategy_);
  state_.alpha_t = initial_alpha(strategy_);
}

double Coach::observe(double e_t) {
  const double next = next_crash_rate(strategy_, state_, e_t);
  state_.alpha_t = next;
  state_.last_e = e_t;
  ++state_.episode_index;
  return next;
}

}  // namespace coachmarl
