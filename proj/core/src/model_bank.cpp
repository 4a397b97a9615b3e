#include "tiva/model_bank.hpp"

#include "tiva/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace tiva {

void GridSpec::validate() const {
  for (const auto* axis : {&c50p_quantiles, &c50r_quantiles, &gamma_quantiles}) {
    if (axis->empty()) {
      throw std::invalid_argument("grid axis needs at least one quantile");
    }
    for (double q : *axis) {
      if (!(q > 0.0) || !(q < 1.0)) {
        throw std::invalid_argument("grid quantiles must lie in (0, 1)");
      }
    }
  }
}

ModelGrid build_grid(const PdUncertainty& pd, const GridSpec& spec) {
  spec.validate();
  auto level = [](const LogNormalParam& p, double q) {
    return p.nominal * std::exp(p.log_sd * normal_quantile(q));
  };

  ModelGrid grid;
  grid.candidates.reserve(spec.c50p_quantiles.size() * spec.c50r_quantiles.size() *
                          spec.gamma_quantiles.size());
  for (double qp : spec.c50p_quantiles) {
    for (double qr : spec.c50r_quantiles) {
      for (double qg : spec.gamma_quantiles) {
        ThetaVector theta{level(pd.c50p, qp), level(pd.c50r, qr), level(pd.gamma, qg)};
        theta.validate();
        grid.candidates.push_back(theta);
      }
    }
  }
  return grid;
}

int nearest_candidate(const ModelGrid& grid, const ThetaVector& theta) {
  if (grid.candidates.empty()) {
    throw std::invalid_argument("empty model grid");
  }
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(grid.candidates.size()); ++i) {
    const ThetaVector& c = grid.candidates[static_cast<std::size_t>(i)];
    const double dp = std::log(c.c50p / theta.c50p);
    const double dr = std::log(c.c50r / theta.c50r);
    const double dg = std::log(c.gamma / theta.gamma);
    const double dist = dp * dp + dr * dr + dg * dg;
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

void SelectorConfig::validate() const {
  if (n_c < 1) {
    throw std::invalid_argument("n_c must be >= 1");
  }
  if (alpha < 0.0 || beta < 0.0) {
    throw std::invalid_argument("alpha/beta must be >= 0");
  }
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be > 0");
  }
  if (delta < 0.0) {
    throw std::invalid_argument("delta must be >= 0");
  }
  if (min_window < 1 || min_window > n_c) {
    throw std::invalid_argument("min_window must lie in [1, n_c]");
  }
}

double model_match_criterion(const Vec8& start_estimate,
                             std::span<const Vec2> inputs,
                             std::span<const double> measurements,
                             const PdParams& pd, const DiscreteDynamics& dyn,
                             const SelectorConfig& config) {
  if (measurements.size() != inputs.size() + 1) {
    throw std::invalid_argument("criterion needs one more measurement than inputs");
  }
  const int window = static_cast<int>(inputs.size());

  // rebuild the trajectory from the stored estimate under the applied inputs
  Vec8 x = start_estimate;
  double discounted = 0.0;
  double last_error = 0.0;
  for (int j = 0; j <= window; ++j) {
    const double err = bis_output(x, pd) - measurements[static_cast<std::size_t>(j)];
    const double age = static_cast<double>(window - j);
    discounted += std::exp(-config.lambda * age) * err * err;
    if (j == window) {
      last_error = err;
    } else {
      x = dyn.a * x + dyn.b * inputs[static_cast<std::size_t>(j)];
    }
  }
  return config.alpha * last_error * last_error + config.beta * discounted;
}

int select_model(int current, std::span<const double> criteria, double delta) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(criteria.size()); ++i) {
    if (criteria[static_cast<std::size_t>(i)] < criteria[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  if (criteria[static_cast<std::size_t>(current)] - criteria[static_cast<std::size_t>(best)] > delta) {
    return best;
  }
  return current;
}

ModelBank::ModelBank(ModelGrid grid, const EkfConfig& ekf_config,
                     const DiscreteDynamics& dynamics,
                     const SelectorConfig& selector, double e0,
                     int initial_index)
    : grid_(std::move(grid)),
      ekf_config_(ekf_config),
      dynamics_(dynamics),
      selector_(selector),
      selected_(initial_index) {
  if (grid_.candidates.empty()) {
    throw std::invalid_argument("model bank needs at least one candidate");
  }
  if (initial_index < 0 || initial_index >= static_cast<int>(grid_.candidates.size())) {
    throw std::invalid_argument("initial model index out of range");
  }
  ekf_config_.validate();
  selector_.validate();

  filters_.reserve(grid_.candidates.size());
  for (const ThetaVector& theta : grid_.candidates) {
    filters_.push_back(make_ekf(ekf_config_, theta, e0));
  }
  criteria_.assign(filters_.size(), 0.0);
  estimates_.resize(filters_.size());
}

ModelBank::StepResult ModelBank::step(double y, const Vec2& u_prev) {
  const std::size_t n = filters_.size();
  const std::size_t est_cap = static_cast<std::size_t>(selector_.n_c) + 1;

  if (ticks_ > 0) {
    for (EkfState& f : filters_) {
      ekf_predict_only(f, u_prev, dynamics_, ekf_config_.r1);
    }
    inputs_.push_back(u_prev);
    if (inputs_.size() > est_cap - 1) {
      inputs_.erase(inputs_.begin());
    }
  }

  for (EkfState& f : filters_) {
    ekf_measurement_update(f, y, ekf_config_.r2);
  }

  measurements_.push_back(y);
  if (measurements_.size() > est_cap) {
    measurements_.erase(measurements_.begin());
  }
  for (std::size_t i = 0; i < n; ++i) {
    estimates_[i].push_back(filters_[i].x_hat);
    if (estimates_[i].size() > est_cap) {
      estimates_[i].erase(estimates_[i].begin());
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    criteria_[i] = model_match_criterion(estimates_[i].front(), inputs_,
                                         measurements_, filters_[i].pd,
                                         dynamics_, selector_);
  }

  // switching arms once the replay window has a little substance
  if (ticks_ >= selector_.min_window) {
    selected_ = select_model(selected_, criteria_, selector_.delta);
  }
  ++ticks_;

  const EkfState& active = filters_[static_cast<std::size_t>(selected_)];
  return {selected_, active.pd.theta, active.x_hat};
}

}  // namespace tiva
