#include "tiva/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tiva {

namespace {

using nlohmann::json;

void check_keys(const json& node, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& item : node.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("unknown config key '" + where + "." + item.key() + "'");
    }
  }
}

void read(const json& node, const char* key, double& out) {
  if (node.contains(key)) {
    out = node.at(key).get<double>();
  }
}

void read(const json& node, const char* key, int& out) {
  if (node.contains(key)) {
    out = node.at(key).get<int>();
  }
}

void read(const json& node, const char* key, bool& out) {
  if (node.contains(key)) {
    out = node.at(key).get<bool>();
  }
}

void read(const json& node, const char* key, std::vector<double>& out) {
  if (node.contains(key)) {
    out = node.at(key).get<std::vector<double>>();
  }
}

void read_param(const json& node, const char* key, LogNormalParam& out,
                const std::string& where) {
  if (!node.contains(key)) {
    return;
  }
  const json& p = node.at(key);
  check_keys(p, {"nominal", "log_sd"}, where + "." + key);
  read(p, "nominal", out.nominal);
  read(p, "log_sd", out.log_sd);
}

void read_range(const json& node, const char* key, Range& out,
                const std::string& where) {
  if (!node.contains(key)) {
    return;
  }
  const json& r = node.at(key);
  check_keys(r, {"lo", "hi"}, where + "." + key);
  read(r, "lo", out.lo);
  read(r, "hi", out.hi);
}

void read_drug(const json& node, const char* key, DrugUncertainty& out,
               const std::string& where) {
  if (!node.contains(key)) {
    return;
  }
  const json& d = node.at(key);
  const std::string here = where + "." + key;
  check_keys(d, {"v1", "v2", "v3", "cl1", "cl2", "cl3", "ke"}, here);
  read_param(d, "v1", out.v1, here);
  read_param(d, "v2", out.v2, here);
  read_param(d, "v3", out.v3, here);
  read_param(d, "cl1", out.cl1, here);
  read_param(d, "cl2", out.cl2, here);
  read_param(d, "cl3", out.cl3, here);
  read_param(d, "ke", out.ke, here);
}

Vec8 diag_from(const std::vector<double>& values, const char* what) {
  if (values.size() != 8) {
    throw std::invalid_argument(std::string(what) + " needs exactly 8 entries");
  }
  Vec8 v;
  for (int i = 0; i < 8; ++i) {
    v(i) = values[static_cast<std::size_t>(i)];
  }
  return v;
}

json param_json(const LogNormalParam& p) {
  return {{"nominal", p.nominal}, {"log_sd", p.log_sd}};
}

json drug_json(const DrugUncertainty& d) {
  return {{"v1", param_json(d.v1)},   {"v2", param_json(d.v2)},
          {"v3", param_json(d.v3)},   {"cl1", param_json(d.cl1)},
          {"cl2", param_json(d.cl2)}, {"cl3", param_json(d.cl3)},
          {"ke", param_json(d.ke)}};
}

std::vector<double> diag_of(const Mat8& m) {
  std::vector<double> d(8);
  for (int i = 0; i < 8; ++i) {
    d[static_cast<std::size_t>(i)] = m(i, i);
  }
  return d;
}

}  // namespace

LabConfig load_config_json(const std::string& json_text) {
  const json root = json::parse(json_text);
  LabConfig cfg = LabConfig::defaults();

  check_keys(root,
             {"uncertainty", "ekf", "grid", "selector", "mpc", "governor",
              "pid", "scenario"},
             "root");

  if (root.contains("uncertainty")) {
    const json& u = root.at("uncertainty");
    check_keys(u, {"propofol", "remifentanil", "pd", "demographics", "clamp_three_sigma"},
               "uncertainty");
    read_drug(u, "propofol", cfg.uncertainty.propofol, "uncertainty");
    read_drug(u, "remifentanil", cfg.uncertainty.remifentanil, "uncertainty");
    if (u.contains("pd")) {
      const json& pd = u.at("pd");
      check_keys(pd, {"c50p", "c50r", "gamma", "e0"}, "uncertainty.pd");
      read_param(pd, "c50p", cfg.uncertainty.pd.c50p, "uncertainty.pd");
      read_param(pd, "c50r", cfg.uncertainty.pd.c50r, "uncertainty.pd");
      read_param(pd, "gamma", cfg.uncertainty.pd.gamma, "uncertainty.pd");
      read_param(pd, "e0", cfg.uncertainty.pd.e0, "uncertainty.pd");
    }
    if (u.contains("demographics")) {
      const json& d = u.at("demographics");
      check_keys(d, {"age", "height", "weight"}, "uncertainty.demographics");
      read_range(d, "age", cfg.uncertainty.demographics.age, "demographics");
      read_range(d, "height", cfg.uncertainty.demographics.height, "demographics");
      read_range(d, "weight", cfg.uncertainty.demographics.weight, "demographics");
    }
    read(u, "clamp_three_sigma", cfg.uncertainty.clamp_three_sigma);
  }

  if (root.contains("ekf")) {
    const json& e = root.at("ekf");
    check_keys(e, {"r1_diag", "r2", "p0_diag"}, "ekf");
    std::vector<double> diag;
    read(e, "r1_diag", diag);
    if (!diag.empty()) {
      cfg.ekf.r1 = diag_from(diag, "ekf.r1_diag").asDiagonal();
    }
    diag.clear();
    read(e, "p0_diag", diag);
    if (!diag.empty()) {
      cfg.ekf.p0 = diag_from(diag, "ekf.p0_diag").asDiagonal();
    }
    read(e, "r2", cfg.ekf.r2);
  }

  if (root.contains("grid")) {
    const json& g = root.at("grid");
    check_keys(g, {"c50p_quantiles", "c50r_quantiles", "gamma_quantiles"}, "grid");
    read(g, "c50p_quantiles", cfg.grid.c50p_quantiles);
    read(g, "c50r_quantiles", cfg.grid.c50r_quantiles);
    read(g, "gamma_quantiles", cfg.grid.gamma_quantiles);
  }

  if (root.contains("selector")) {
    const json& s = root.at("selector");
    check_keys(s, {"n_c", "alpha", "beta", "lambda", "delta", "min_window"},
               "selector");
    read(s, "n_c", cfg.selector.n_c);
    read(s, "alpha", cfg.selector.alpha);
    read(s, "beta", cfg.selector.beta);
    read(s, "lambda", cfg.selector.lambda);
    read(s, "delta", cfg.selector.delta);
    read(s, "min_window", cfg.selector.min_window);
  }

  if (root.contains("mpc")) {
    const json& m = root.at("mpc");
    check_keys(m,
               {"horizon", "control_horizon", "r_diag", "sample_period_s",
                "cost_exponent", "max_iterations", "grad_tolerance"},
               "mpc");
    read(m, "horizon", cfg.mpc.horizon);
    read(m, "control_horizon", cfg.mpc.control_horizon);
    std::vector<double> r_diag;
    read(m, "r_diag", r_diag);
    if (!r_diag.empty()) {
      if (r_diag.size() != 2) {
        throw std::invalid_argument("mpc.r_diag needs exactly 2 entries");
      }
      cfg.mpc.r = Eigen::Vector2d(r_diag[0], r_diag[1]).asDiagonal();
    }
    read(m, "sample_period_s", cfg.mpc.sample_period_s);
    read(m, "cost_exponent", cfg.mpc.cost_exponent);
    read(m, "max_iterations", cfg.mpc.max_iterations);
    read(m, "grad_tolerance", cfg.mpc.grad_tolerance);
  }

  if (root.contains("governor")) {
    const json& g = root.at("governor");
    check_keys(g, {"k_i", "activation_time_s"}, "governor");
    read(g, "k_i", cfg.governor.k_i);
    read(g, "activation_time_s", cfg.governor.activation_time_s);
  }

  if (root.contains("pid")) {
    const json& p = root.at("pid");
    check_keys(p, {"kp", "ti", "td", "ratio", "sample_period_s"}, "pid");
    read(p, "kp", cfg.pid.kp);
    read(p, "ti", cfg.pid.ti);
    read(p, "td", cfg.pid.td);
    read(p, "ratio", cfg.pid.ratio);
    read(p, "sample_period_s", cfg.pid.sample_period_s);
  }

  if (root.contains("scenario")) {
    const json& s = root.at("scenario");
    check_keys(s,
               {"duration_s", "bis_target", "base_period_s",
                "controller_period_s", "noise"},
               "scenario");
    read(s, "duration_s", cfg.scenario.duration_s);
    read(s, "bis_target", cfg.scenario.bis_target);
    read(s, "base_period_s", cfg.scenario.base_period_s);
    read(s, "controller_period_s", cfg.scenario.controller_period_s);
    if (s.contains("noise")) {
      const json& n = s.at("noise");
      check_keys(n, {"enabled", "std_dev"}, "scenario.noise");
      read(n, "enabled", cfg.scenario.noise.enabled);
      read(n, "std_dev", cfg.scenario.noise.std_dev);
    }
  }

  cfg.uncertainty.validate();
  cfg.ekf.validate();
  cfg.grid.validate();
  cfg.selector.validate();
  cfg.mpc.validate();
  cfg.pid.validate();
  return cfg;
}

LabConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_config_json(buffer.str());
}

std::string config_to_json(const LabConfig& cfg) {
  json root;
  root["uncertainty"] = {
      {"propofol", drug_json(cfg.uncertainty.propofol)},
      {"remifentanil", drug_json(cfg.uncertainty.remifentanil)},
      {"pd",
       {{"c50p", param_json(cfg.uncertainty.pd.c50p)},
        {"c50r", param_json(cfg.uncertainty.pd.c50r)},
        {"gamma", param_json(cfg.uncertainty.pd.gamma)},
        {"e0", param_json(cfg.uncertainty.pd.e0)}}},
      {"demographics",
       {{"age", {{"lo", cfg.uncertainty.demographics.age.lo}, {"hi", cfg.uncertainty.demographics.age.hi}}},
        {"height", {{"lo", cfg.uncertainty.demographics.height.lo}, {"hi", cfg.uncertainty.demographics.height.hi}}},
        {"weight", {{"lo", cfg.uncertainty.demographics.weight.lo}, {"hi", cfg.uncertainty.demographics.weight.hi}}}}},
      {"clamp_three_sigma", cfg.uncertainty.clamp_three_sigma}};
  root["ekf"] = {{"r1_diag", diag_of(cfg.ekf.r1)},
                 {"r2", cfg.ekf.r2},
                 {"p0_diag", diag_of(cfg.ekf.p0)}};
  root["grid"] = {{"c50p_quantiles", cfg.grid.c50p_quantiles},
                  {"c50r_quantiles", cfg.grid.c50r_quantiles},
                  {"gamma_quantiles", cfg.grid.gamma_quantiles}};
  root["selector"] = {{"n_c", cfg.selector.n_c},
                      {"alpha", cfg.selector.alpha},
                      {"beta", cfg.selector.beta},
                      {"lambda", cfg.selector.lambda},
                      {"delta", cfg.selector.delta},
                      {"min_window", cfg.selector.min_window}};
  root["mpc"] = {{"horizon", cfg.mpc.horizon},
                 {"control_horizon", cfg.mpc.control_horizon},
                 {"r_diag", std::vector<double>{cfg.mpc.r(0, 0), cfg.mpc.r(1, 1)}},
                 {"sample_period_s", cfg.mpc.sample_period_s},
                 {"cost_exponent", cfg.mpc.cost_exponent},
                 {"max_iterations", cfg.mpc.max_iterations},
                 {"grad_tolerance", cfg.mpc.grad_tolerance}};
  root["governor"] = {{"k_i", cfg.governor.k_i},
                      {"activation_time_s", cfg.governor.activation_time_s}};
  root["pid"] = {{"kp", cfg.pid.kp},
                 {"ti", cfg.pid.ti},
                 {"td", cfg.pid.td},
                 {"ratio", cfg.pid.ratio},
                 {"sample_period_s", cfg.pid.sample_period_s}};
  root["scenario"] = {{"duration_s", cfg.scenario.duration_s},
                      {"bis_target", cfg.scenario.bis_target},
                      {"base_period_s", cfg.scenario.base_period_s},
                      {"controller_period_s", cfg.scenario.controller_period_s},
                      {"noise",
                       {{"enabled", cfg.scenario.noise.enabled},
                        {"std_dev", cfg.scenario.noise.std_dev}}}};
  return root.dump(2);
}

}  // namespace tiva
