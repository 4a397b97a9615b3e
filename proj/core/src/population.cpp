#include "tiva/population.hpp"

#include "tiva/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tiva {

UncertaintySpec UncertaintySpec::defaults() {
  UncertaintySpec spec;
  spec.propofol = {
      {4.27, 0.17}, {25.94, 0.25}, {238.0, 2.66},
      {1.64, 0.16}, {1.72, 0.02},  {0.84, 0.10},
      {0.456, 0.19},
  };
  spec.remifentanil = {
      {5.22, 0.26}, {10.26, 0.28}, {5.42, 0.60},
      {2.69, 0.14}, {2.20, 0.35},  {0.08, 0.39},
      {0.63, 0.62},
  };
  spec.pd = {{4.47, 0.18}, {19.3, 0.76}, {1.43, 0.30}, {kNominalE0, 0.0}};
  return spec;
}

namespace {

void check_param(const LogNormalParam& p, const char* name) {
  if (!(p.nominal > 0.0)) {
    throw std::invalid_argument(std::string(name) + ": nominal must be positive");
  }
  if (p.log_sd < 0.0) {
    throw std::invalid_argument(std::string(name) + ": log_sd must be >= 0");
  }
}

void check_drug(const DrugUncertainty& d, const char* drug) {
  check_param(d.v1, drug);
  check_param(d.v2, drug);
  check_param(d.v3, drug);
  check_param(d.cl1, drug);
  check_param(d.cl2, drug);
  check_param(d.cl3, drug);
  check_param(d.ke, drug);
}

double draw(const LogNormalParam& p, Rng& rng, bool clamp) {
  double z = rng.next_gaussian();
  if (clamp) {
    z = std::clamp(z, -3.0, 3.0);
  }
  return p.nominal * std::exp(p.log_sd * z);
}

double uniform_in(const Range& r, Rng& rng) {
  return r.lo + (r.hi - r.lo) * rng.next_double();
}

PkParams draw_pk(const DrugUncertainty& d, Rng& rng, bool clamp) {
  PkParams pk;
  pk.v1 = draw(d.v1, rng, clamp);
  pk.v2 = draw(d.v2, rng, clamp);
  pk.v3 = draw(d.v3, rng, clamp);
  pk.cl1 = draw(d.cl1, rng, clamp);
  pk.cl2 = draw(d.cl2, rng, clamp);
  pk.cl3 = draw(d.cl3, rng, clamp);
  pk.ke = draw(d.ke, rng, clamp);
  return pk;
}

}  // namespace

void UncertaintySpec::validate() const {
  check_drug(propofol, "propofol");
  check_drug(remifentanil, "remifentanil");
  check_param(pd.c50p, "c50p");
  check_param(pd.c50r, "c50r");
  check_param(pd.gamma, "gamma");
  check_param(pd.e0, "e0");
  if (pd.e0.log_sd != 0.0) {
    throw std::invalid_argument("e0 log_sd must be 0 (baseline BIS is fixed)");
  }
  for (const Range* r : {&demographics.age, &demographics.height, &demographics.weight}) {
    if (!(r->lo <= r->hi)) {
      throw std::invalid_argument("demographic range must have lo <= hi");
    }
  }
}

SampledPatient sample_patient(const UncertaintySpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  SampledPatient patient;
  patient.seed = seed;
  patient.demographics.age_y = uniform_in(spec.demographics.age, rng);
  patient.demographics.height_cm = uniform_in(spec.demographics.height, rng);
  patient.demographics.weight_kg = uniform_in(spec.demographics.weight, rng);
  patient.demographics.sex = rng.next_double() < 0.5 ? 0 : 1;

  const bool clamp = spec.clamp_three_sigma;
  patient.pk_p = draw_pk(spec.propofol, rng, clamp);
  patient.pk_r = draw_pk(spec.remifentanil, rng, clamp);
  patient.pd.theta.c50p = draw(spec.pd.c50p, rng, clamp);
  patient.pd.theta.c50r = draw(spec.pd.c50r, rng, clamp);
  patient.pd.theta.gamma = draw(spec.pd.gamma, rng, clamp);
  patient.pd.e0 = draw(spec.pd.e0, rng, clamp);
  return patient;
}

std::vector<SampledPatient> sample_cohort(int n, const UncertaintySpec& spec,
                                          std::uint64_t master_seed) {
  if (n < 1) {
    throw std::invalid_argument("cohort size must be >= 1");
  }
  std::vector<SampledPatient> cohort;
  cohort.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SampledPatient p = sample_patient(spec, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
    p.id = i;
    cohort.push_back(std::move(p));
  }
  return cohort;
}

}  // namespace tiva
