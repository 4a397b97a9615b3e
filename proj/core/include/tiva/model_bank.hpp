#pragma once

#include "tiva/ekf.hpp"
#include "tiva/population.hpp"

#include <span>
#include <vector>

namespace tiva {

// Per-axis quantile levels of the candidate grid. Candidates sit at
// log-normal quantiles of the PD spreads, so the grid widens with the
// reported uncertainty instead of using ad-hoc offsets.
struct GridSpec {
  std::vector<double> c50p_quantiles{0.05, 0.275, 0.50, 0.725, 0.95};
  std::vector<double> c50r_quantiles{0.10, 0.50, 0.90};
  std::vector<double> gamma_quantiles{0.10, 0.50, 0.90};

  void validate() const;
};

struct ModelGrid {
  std::vector<ThetaVector> candidates;
};

// Cartesian product over (c50p, c50r, gamma) quantile levels; the default
// 5x3x3 layout yields 45 candidates with the nominal theta at the center.
ModelGrid build_grid(const PdUncertainty& pd, const GridSpec& spec);

// Index of the candidate closest to theta in log-parameter space.
int nearest_candidate(const ModelGrid& grid, const ThetaVector& theta);

struct SelectorConfig {
  int n_c = 30;         // replay window length (samples)
  double alpha = 0.0;   // weight on the instantaneous squared error
  double beta = 1.0;    // weight on the exponentially discounted window
  double lambda = 0.05; // discount rate per sample
  double delta = 30.0;  // switching threshold
  int min_window = 3;   // samples required before switching arms; induction
                        // moves fast, so waiting for a full window would
                        // sideline the bank exactly when it matters

  void validate() const;
};

// Model-matching criterion for one candidate: replay the trajectory from the
// estimate stored a window ago under the recorded inputs, score the BIS
// prediction errors against the recorded measurements.
// measurements covers ticks k-W..k (W = inputs.size()), newest last.
double model_match_criterion(const Vec8& start_estimate,
                             std::span<const Vec2> inputs,
                             std::span<const double> measurements,
                             const PdParams& pd, const DiscreteDynamics& dyn,
                             const SelectorConfig& config);

// Hysteresis switch: adopt the argmin candidate only when it beats the
// incumbent by more than delta; ties resolve to the lowest index.
int select_model(int current, std::span<const double> criteria, double delta);

// Bank of parallel EKFs (one per candidate theta) sharing the nominal PK
// dynamics, plus the replay buffers feeding the selector.
class ModelBank {
public:
  struct StepResult {
    int selected = 0;
    ThetaVector theta;
    Vec8 x_hat = Vec8::Zero();  // posterior estimate of the selected filter
  };

  ModelBank(ModelGrid grid, const EkfConfig& ekf_config,
            const DiscreteDynamics& dynamics, const SelectorConfig& selector,
            double e0 = kNominalE0, int initial_index = 0);

  // One controller tick: propagate every filter with the input held over the
  // elapsed interval, correct with the new measurement, refresh criteria and
  // the selection. Switching stays disabled until a full window exists.
  StepResult step(double y, const Vec2& u_prev);

  int size() const { return static_cast<int>(filters_.size()); }
  int selected_index() const { return selected_; }
  const std::vector<double>& criteria() const { return criteria_; }
  const ModelGrid& grid() const { return grid_; }
  const EkfState& filter(int i) const { return filters_[static_cast<std::size_t>(i)]; }
  int ticks() const { return ticks_; }

private:
  ModelGrid grid_;
  EkfConfig ekf_config_;
  DiscreteDynamics dynamics_;
  SelectorConfig selector_;
  std::vector<EkfState> filters_;
  std::vector<double> criteria_;

  // replay buffers: estimates/measurements keep n_c+1 ticks, inputs n_c
  std::vector<std::vector<Vec8>> estimates_;
  std::vector<double> measurements_;
  std::vector<Vec2> inputs_;

  int selected_ = 0;
  int ticks_ = 0;
};

}  // namespace tiva
