#pragma once

#include "tiva/pkpd.hpp"

#include <cstdint>
#include <vector>

namespace tiva {

struct Demographics {
  double age_y = 0.0;
  double height_cm = 0.0;
  double weight_kg = 0.0;
  int sex = 0;  // 0 = female, 1 = male
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct DemographicRanges {
  Range age{18.0, 70.0};
  Range height{150.0, 190.0};
  Range weight{50.0, 100.0};
};

// One log-normally perturbed parameter: sample = nominal * exp(log_sd * z).
struct LogNormalParam {
  double nominal = 0.0;
  double log_sd = 0.0;
};

struct DrugUncertainty {
  LogNormalParam v1, v2, v3, cl1, cl2, cl3, ke;
};

struct PdUncertainty {
  LogNormalParam c50p, c50r, gamma, e0;
};

// Nominals and log-standard-deviations for both drugs plus the PD surface,
// with the uniform demographic ranges used for patient metadata.
struct UncertaintySpec {
  DrugUncertainty propofol;
  DrugUncertainty remifentanil;
  PdUncertainty pd;
  DemographicRanges demographics;

  // Alternate sampling mode capping each factor at exp(+-3 sigma). Off by
  // default; the unclamped draw is the reference protocol even though the
  // propofol v3 spread (log sd 2.66) produces occasional extreme tails.
  bool clamp_three_sigma = false;

  static UncertaintySpec defaults();
  void validate() const;
};

struct SampledPatient {
  int id = 0;
  Demographics demographics;
  PkParams pk_p;
  PkParams pk_r;
  PdParams pd;
  std::uint64_t seed = 0;
};

// Draws one virtual patient. The draw order (demographics, propofol PK,
// remifentanil PK, PD) is fixed so a seed always maps to the same patient.
SampledPatient sample_patient(const UncertaintySpec& spec, std::uint64_t seed);

// n independent patients with per-patient seeds derived from the master seed;
// partitioning the cohort across workers cannot change its contents.
std::vector<SampledPatient> sample_cohort(int n, const UncertaintySpec& spec,
                                          std::uint64_t master_seed);

}  // namespace tiva
