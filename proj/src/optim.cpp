#include "iconnet/optim.hpp"

#include <algorithm>
#include <string>

namespace iconnet {

namespace {

double cosine_anneal(double start, double end, double fraction) {
  return end + (start - end) / 2.0 * (1.0 + std::cos(kPi<double> * fraction));
}

}  // namespace

double onecycle_lr(const ScheduleConfig& schedule, long step) {
  require(schedule.total_steps >= 2, "total_steps must be >= 2");
  require(schedule.pct_start > 0.0 && schedule.pct_start < 1.0, "pct_start must lie in (0, 1)");
  require(schedule.max_lr > 0.0 && schedule.div_factor > 0.0 && schedule.final_div_factor > 0.0,
          "learning-rate factors must be positive");
  require(step >= 0 && step < schedule.total_steps,
          "step " + std::to_string(step) + " outside [0, " + std::to_string(schedule.total_steps) + ")");

  const long last = schedule.total_steps - 1;
  const long peak = std::clamp<long>(std::lround(schedule.pct_start * static_cast<double>(schedule.total_steps)),
                                     1, last);
  const double initial = schedule.max_lr / schedule.div_factor;
  const double final_lr = schedule.max_lr / schedule.final_div_factor;
  if (step <= peak) {
    return cosine_anneal(initial, schedule.max_lr, static_cast<double>(step) / static_cast<double>(peak));
  }
  return cosine_anneal(schedule.max_lr, final_lr,
                       static_cast<double>(step - peak) / static_cast<double>(last - peak));
}

}  // namespace iconnet
