#ifndef RTIDP_SCHEDULE_H_
#define RTIDP_SCHEDULE_H_

#include <string>
#include <string_view>
#include <vector>

namespace rtidp {

enum class ScheduleKind { kLinear, kSquaredCosine };

std::string_view ToString(ScheduleKind kind);
// Accepts "linear" and "squared_cosine"; throws std::invalid_argument.
ScheduleKind ParseScheduleKind(std::string_view name);

// Offset and clamp of the squared-cosine schedule.
inline constexpr double kCosineOffset = 0.008;
inline constexpr double kMaxBeta = 0.999;
// Endpoints of the linear schedule.
inline constexpr double kLinearBetaStart = 1e-4;
inline constexpr double kLinearBetaEnd = 0.02;

// DDPM noise schedule with 1-based step indices k = 1..K. Index 0 of every
// array holds the clean boundary (beta = 0, alpha = alpha_bar = 1,
// sigma = 0). Immutable after construction.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  ScheduleKind kind() const { return kind_; }
  int total_steps() const { return total_steps_; }

  // All accessors accept 0 <= k <= K and throw std::invalid_argument
  // otherwise.
  double beta(int k) const { return betas_[Check(k)]; }
  double alpha(int k) const { return alphas_[Check(k)]; }
  double alpha_bar(int k) const { return alpha_bars_[Check(k)]; }
  // Standard deviation of the noise added by the reverse step at k.
  double sigma(int k) const { return sigmas_[Check(k)]; }

  // Arrays of length K + 1 including the k = 0 boundary.
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }
  const std::vector<double>& sigmas() const { return sigmas_; }

  // Columns: k, beta, alpha, alpha_bar, sigma; rows k = 1..K.
  std::string ToCsv() const;

 private:
  friend NoiseSchedule MakeSchedule(ScheduleKind kind, int total_steps);
  friend NoiseSchedule ScheduleFromBetas(ScheduleKind kind,
                                         std::vector<double> betas);
  int Check(int k) const;

  ScheduleKind kind_ = ScheduleKind::kSquaredCosine;
  int total_steps_ = 0;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> sigmas_;
};

// Throws std::invalid_argument when total_steps < 2.
NoiseSchedule MakeSchedule(ScheduleKind kind, int total_steps);

// Builds the derived arrays from betas[1..K] (betas[0] is ignored).
NoiseSchedule ScheduleFromBetas(ScheduleKind kind, std::vector<double> betas);

// sqrt((1 - abar_{k-1}) / (1 - abar_k) * beta_k). The posterior variance
// is stored as its square root because the reverse step scales unit noise.
double PosteriorSigma(const NoiseSchedule& s, int k);

}  // namespace rtidp

#endif  // RTIDP_SCHEDULE_H_
