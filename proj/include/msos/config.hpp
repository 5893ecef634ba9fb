#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "diffusion.hpp"
#include "errors.hpp"
#include "vesselness.hpp"
#include "wavelets.hpp"

namespace msos {

/// Bank settings before the image grid is known. Zero radii or window select the defaults
/// (rho- = 4 pi / width, rho+ = 0.8 pi, sigma_s = min(w, h) / 8); sigma_s = inf disables it.
struct BankConfig {
  int n = 20, m = 4, k = 3;
  double rho_minus = 0, rho_plus = 0, sigma_s = 0;
  double recon_floor = 0.05;
};

inline BankParams resolve_bank(const BankConfig& c, int width, int height) {
  BankParams p = default_bank_params(width, height, c.n, c.m, c.k);
  if (c.rho_minus > 0) p.rho_minus = c.rho_minus;
  if (c.rho_plus > 0) p.rho_plus = c.rho_plus;
  if (c.sigma_s != 0) p.sigma_s = c.sigma_s;
  p.recon_floor = c.recon_floor;
  if (p.rho_minus > 0 && p.rho_plus > p.rho_minus) derive_scales(p);
  validate(p);
  return p;
}

struct PipelineConfig {
  BankConfig bank;
  std::string enhance = "ced-sos";  // none | linear | ced-sos
  DiffusionParams linear;
  int kernel_rx = 8, kernel_rtau = 1;
  CedParams ced;
  std::string inverse = "exact";     // exact | approx
  std::string vesselness = "none";   // none | frangi | se2 | sim2
  VesselnessParams vessel;
  int vessel_layer = 0;
  std::string input, output_dir = "out";
  std::vector<std::string> formats{"png", "raw"};
  bool save_volume = false;
  uint64_t seed = 0;
};

namespace cfg {

inline std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // Shortest %g form that reads back to the same double.
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double parse_double(const std::string& s, const std::string& key) {
  const char* b = s.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  if (e == b || *e != '\0') throw ConfigError("invalid number '" + s + "' for " + key);
  return v;
}

inline long long parse_int(const std::string& s, const std::string& key) {
  const char* b = s.c_str();
  char* e = nullptr;
  errno = 0;
  const long long v = std::strtoll(b, &e, 10);
  if (e == b || *e != '\0' || errno == ERANGE) throw ConfigError("invalid integer '" + s + "' for " + key);
  return v;
}

inline uint64_t parse_uint64(const std::string& s, const std::string& key) {
  const char* b = s.c_str();
  char* e = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(b, &e, 10);
  if (e == b || *e != '\0' || errno == ERANGE || s.find('-') != std::string::npos)
    throw ConfigError("invalid unsigned integer '" + s + "' for " + key);
  return v;
}

inline bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("invalid flag '" + s + "' for " + key);
}

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    out.push_back(parse_double(item.substr(a, b - a + 1), key));
  }
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

inline std::string mode_name(Sigma2Mode m) {
  return m == Sigma2Mode::fixed ? "fixed" : m == Sigma2Mode::max_fraction ? "max_fraction" : "scale_adapted";
}

inline Sigma2Mode parse_mode(const std::string& s) {
  if (s == "fixed") return Sigma2Mode::fixed;
  if (s == "max_fraction") return Sigma2Mode::max_fraction;
  if (s == "scale_adapted") return Sigma2Mode::scale_adapted;
  throw ConfigError("unknown sigma2 mode '" + s + "'");
}

}  // namespace cfg

inline boost::property_tree::ptree to_ptree(const PipelineConfig& c) {
  using cfg::fmt;
  boost::property_tree::ptree t;
  t.put("bank.n_orientations", c.bank.n);
  t.put("bank.n_scales", c.bank.m);
  t.put("bank.spline_order", c.bank.k);
  t.put("bank.rho_minus", fmt(c.bank.rho_minus));
  t.put("bank.rho_plus", fmt(c.bank.rho_plus));
  t.put("bank.sigma_s", fmt(c.bank.sigma_s));
  t.put("bank.recon_floor", fmt(c.bank.recon_floor));
  t.put("pipeline.enhance", c.enhance);
  t.put("pipeline.inverse", c.inverse);
  t.put("pipeline.vesselness", c.vesselness);
  t.put("pipeline.seed", c.seed);
  t.put("linear.d11", fmt(c.linear.d11));
  t.put("linear.d22", fmt(c.linear.d22));
  t.put("linear.d33", fmt(c.linear.d33));
  t.put("linear.d44", fmt(c.linear.d44));
  t.put("linear.t", fmt(c.linear.t));
  t.put("linear.kernel_rx", c.kernel_rx);
  t.put("linear.kernel_rtau", c.kernel_rtau);
  t.put("ced.rho_s", fmt(c.ced.rho_s));
  t.put("ced.rho_tilde", fmt(c.ced.rho_tilde));
  t.put("ced.beta", fmt(c.ced.beta));
  t.put("ced.c", fmt(c.ced.c));
  t.put("ced.dt", fmt(c.ced.dt));
  t.put("ced.times", cfg::join(c.ced.times));
  t.put("ced.enforce_horizontality", c.ced.enforce_horizontality ? "true" : "false");
  t.put("ced.times_fine_last", c.ced.times_fine_last ? "true" : "false");
  t.put("vesselness.sigma1", fmt(c.vessel.sigma1));
  t.put("vesselness.sigma2_mode", cfg::mode_name(c.vessel.sigma2_mode));
  t.put("vesselness.sigma2_value", fmt(c.vessel.sigma2_value));
  t.put("vesselness.frangi_scales", cfg::join(c.vessel.frangi_scales));
  t.put("vesselness.rho_tilde", fmt(c.vessel.rho_tilde));
  t.put("vesselness.beta", fmt(c.vessel.beta));
  t.put("vesselness.polarity", c.vessel.bright ? "bright" : "dark");
  t.put("vesselness.horizontal", c.vessel.horizontal ? "true" : "false");
  t.put("vesselness.layer", c.vessel_layer);
  t.put("io.input", c.input);
  t.put("io.output_dir", c.output_dir);
  t.put("io.formats", cfg::join(c.formats));
  t.put("io.save_volume", c.save_volume ? "true" : "false");
  return t;
}

inline std::string serialize(const PipelineConfig& c) {
  std::ostringstream os;
  boost::property_tree::write_ini(os, to_ptree(c));
  return os.str();
}

/// Unknown keys are rejected so that typos do not silently fall back to defaults.
inline PipelineConfig parse_config(const std::string& text) {
  boost::property_tree::ptree t;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, t);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  PipelineConfig c;
  for (const auto& [sec, body] : t) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + sec + "' outside any section");
    for (const auto& [key, node] : body) {
      const std::string k = sec + "." + key, v = node.data();
      auto D = [&] { return cfg::parse_double(v, k); };
      auto I = [&] { return static_cast<int>(cfg::parse_int(v, k)); };
      auto B = [&] { return cfg::parse_bool(v, k); };
      if (k == "bank.n_orientations") c.bank.n = I();
      else if (k == "bank.n_scales") c.bank.m = I();
      else if (k == "bank.spline_order") c.bank.k = I();
      else if (k == "bank.rho_minus") c.bank.rho_minus = D();
      else if (k == "bank.rho_plus") c.bank.rho_plus = D();
      else if (k == "bank.sigma_s") c.bank.sigma_s = D();
      else if (k == "bank.recon_floor") c.bank.recon_floor = D();
      else if (k == "pipeline.enhance") c.enhance = v;
      else if (k == "pipeline.inverse") c.inverse = v;
      else if (k == "pipeline.vesselness") c.vesselness = v;
      else if (k == "pipeline.seed") c.seed = cfg::parse_uint64(v, k);
      else if (k == "linear.d11") c.linear.d11 = D();
      else if (k == "linear.d22") c.linear.d22 = D();
      else if (k == "linear.d33") c.linear.d33 = D();
      else if (k == "linear.d44") c.linear.d44 = D();
      else if (k == "linear.t") c.linear.t = D();
      else if (k == "linear.kernel_rx") c.kernel_rx = I();
      else if (k == "linear.kernel_rtau") c.kernel_rtau = I();
      else if (k == "ced.rho_s") c.ced.rho_s = D();
      else if (k == "ced.rho_tilde") c.ced.rho_tilde = D();
      else if (k == "ced.beta") c.ced.beta = D();
      else if (k == "ced.c") c.ced.c = D();
      else if (k == "ced.dt") c.ced.dt = D();
      else if (k == "ced.times") c.ced.times = cfg::parse_list(v, k);
      else if (k == "ced.enforce_horizontality") c.ced.enforce_horizontality = B();
      else if (k == "ced.times_fine_last") c.ced.times_fine_last = B();
      else if (k == "vesselness.sigma1") c.vessel.sigma1 = D();
      else if (k == "vesselness.sigma2_mode") c.vessel.sigma2_mode = cfg::parse_mode(v);
      else if (k == "vesselness.sigma2_value") c.vessel.sigma2_value = D();
      else if (k == "vesselness.frangi_scales") c.vessel.frangi_scales = cfg::parse_list(v, k);
      else if (k == "vesselness.rho_tilde") c.vessel.rho_tilde = D();
      else if (k == "vesselness.beta") c.vessel.beta = D();
      else if (k == "vesselness.polarity") {
        if (v != "dark" && v != "bright") throw ConfigError("polarity must be dark or bright");
        c.vessel.bright = v == "bright";
      } else if (k == "vesselness.horizontal") c.vessel.horizontal = B();
      else if (k == "vesselness.layer") c.vessel_layer = I();
      else if (k == "io.input") c.input = v;
      else if (k == "io.output_dir") c.output_dir = v;
      else if (k == "io.formats") {
        c.formats.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ','))
          if (!item.empty()) c.formats.push_back(item);
      } else if (k == "io.save_volume") c.save_volume = B();
      else throw ConfigError("unknown config key '" + k + "'");
    }
  }
  return c;
}

inline void validate(const PipelineConfig& c) {
  if (c.enhance != "none" && c.enhance != "linear" && c.enhance != "ced-sos")
    throw ConfigError("pipeline.enhance must be none, linear or ced-sos");
  if (c.inverse != "exact" && c.inverse != "approx") throw ConfigError("pipeline.inverse must be exact or approx");
  if (c.vesselness != "none" && c.vesselness != "frangi" && c.vesselness != "se2" && c.vesselness != "sim2")
    throw ConfigError("pipeline.vesselness must be none, frangi, se2 or sim2");
  for (const auto& f : c.formats)
    if (f != "png" && f != "raw" && f != "pgm") throw ConfigError("unknown output format '" + f + "'");
  validate(c.linear);
  if (c.enhance == "linear" && c.linear.t > 0) require_kernel_params(c.linear);
  if (c.enhance == "ced-sos") {
    validate(c.ced);
    if (static_cast<int>(c.ced.times.size()) != c.bank.m)
      throw ConfigError("ced.times needs one entry per scale (" + std::to_string(c.bank.m) + ")");
  }
}

}  // namespace msos
