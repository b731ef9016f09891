#include "rtidp/schedule.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace rtidp {

std::string_view ToString(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kLinear:
      return "linear";
    case ScheduleKind::kSquaredCosine:
      return "squared_cosine";
  }
  return "unknown";
}

ScheduleKind ParseScheduleKind(std::string_view name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "squared_cosine") return ScheduleKind::kSquaredCosine;
  throw std::invalid_argument("unknown schedule kind: " + std::string(name));
}

int NoiseSchedule::Check(int k) const {
  if (k < 0 || k > total_steps_) {
    throw std::invalid_argument("step index " + std::to_string(k) +
                                " outside [0, " +
                                std::to_string(total_steps_) + "]");
  }
  return k;
}

std::string NoiseSchedule::ToCsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "k,beta,alpha,alpha_bar,sigma\n";
  for (int k = 1; k <= total_steps_; ++k) {
    out << k << ',' << betas_[k] << ',' << alphas_[k] << ',' << alpha_bars_[k]
        << ',' << sigmas_[k] << '\n';
  }
  return out.str();
}

double PosteriorSigma(const NoiseSchedule& s, int k) {
  if (k < 1 || k > s.total_steps()) {
    throw std::invalid_argument("posterior_sigma: step " + std::to_string(k) +
                                " outside [1, " +
                                std::to_string(s.total_steps()) + "]");
  }
  const double beta = s.beta(k);
  if (beta == 0.0) return 0.0;
  const double var =
      (1.0 - s.alpha_bar(k - 1)) / (1.0 - s.alpha_bar(k)) * beta;
  return std::sqrt(std::max(var, 0.0));
}

NoiseSchedule ScheduleFromBetas(ScheduleKind kind, std::vector<double> betas) {
  const int total = static_cast<int>(betas.size()) - 1;
  if (total < 2) throw std::invalid_argument("schedule needs K >= 2");
  NoiseSchedule s;
  s.kind_ = kind;
  s.total_steps_ = total;
  betas[0] = 0.0;
  s.alphas_.assign(total + 1, 1.0);
  s.alpha_bars_.assign(total + 1, 1.0);
  for (int k = 1; k <= total; ++k) {
    if (!(betas[k] > 0.0 && betas[k] < 1.0)) {
      throw std::invalid_argument("beta_" + std::to_string(k) +
                                  " outside (0, 1)");
    }
    s.alphas_[k] = 1.0 - betas[k];
    s.alpha_bars_[k] = s.alpha_bars_[k - 1] * s.alphas_[k];
  }
  s.betas_ = std::move(betas);
  s.sigmas_.assign(total + 1, 0.0);
  for (int k = 1; k <= total; ++k) s.sigmas_[k] = PosteriorSigma(s, k);
  return s;
}

NoiseSchedule MakeSchedule(ScheduleKind kind, int total_steps) {
  if (total_steps < 2) {
    throw std::invalid_argument("schedule needs K >= 2, got " +
                                std::to_string(total_steps));
  }
  std::vector<double> betas(total_steps + 1, 0.0);
  switch (kind) {
    case ScheduleKind::kLinear:
      for (int k = 1; k <= total_steps; ++k) {
        const double frac =
            static_cast<double>(k - 1) / static_cast<double>(total_steps - 1);
        betas[k] = kLinearBetaStart + frac * (kLinearBetaEnd - kLinearBetaStart);
      }
      break;
    case ScheduleKind::kSquaredCosine: {
      auto f = [&](int k) {
        const double t = static_cast<double>(k) / total_steps;
        const double c = std::cos((t + kCosineOffset) / (1.0 + kCosineOffset) *
                                  std::numbers::pi / 2.0);
        return c * c;
      };
      const double f0 = f(0);
      for (int k = 1; k <= total_steps; ++k) {
        const double prev = f(k - 1) / f0;
        const double cur = f(k) / f0;
        betas[k] = std::min(1.0 - cur / prev, kMaxBeta);
      }
      break;
    }
    default:
      throw std::invalid_argument("unknown schedule kind");
  }
  return ScheduleFromBetas(kind, std::move(betas));
}

}  // namespace rtidp
