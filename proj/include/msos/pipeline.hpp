#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "cwt.hpp"
#include "diffusion.hpp"
#include "errors.hpp"
#include "image.hpp"
#include "vesselness.hpp"
#include "wavelets.hpp"

namespace msos {

inline constexpr const char* kToolVersion = "1.0.0";

/// Runs f and prefixes any library error with the stage name, keeping its category.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  const std::string pre = std::string("stage '") + name + "': ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(pre + e.what());
  } catch (const IoError& e) {
    throw IoError(pre + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(pre + e.what());
  } catch (const std::exception& e) {
    throw RuntimeError(pre + e.what());
  }
}

struct PipelineResult {
  Image projected, enhanced, vessel;
  ScoreVolume volume;
  WaveletBank bank;
  double cond_bound = 0, plancherel = 0;
};

/// In-memory pipeline: band projection, forward transform, enhancement, inverse, vesselness.
inline PipelineResult run_pipeline(const Image& input, const PipelineConfig& c) {
  validate(c);
  PipelineResult r;
  r.bank = stage("bank", [&] { return build_bank(resolve_bank(c.bank, input.width, input.height)); });
  r.projected = stage("project", [&] { return band_project(input, r.bank); });
  ScoreVolume u = stage("forward", [&] { return forward(r.projected, r.bank); });
  r.cond_bound = condition_diagnostics(r.bank).cond_bound;
  r.plancherel = plancherel_residual(u, r.projected, r.bank);
  if (c.enhance == "linear" && c.linear.t > 0) {
    u = stage("linear", [&] {
      const KernelGrid g{1.0, c.kernel_rx, r.bank.n(), r.bank.params.s_rho(), c.kernel_rtau};
      return linear_diffuse(u, build_kernel_stack(c.linear, g));
    });
  } else if (c.enhance == "ced-sos") {
    u = stage("ced-sos", [&] { return ced_sos(u, c.ced); });
  }
  r.enhanced = stage("inverse", [&] {
    return c.inverse == "exact" ? inverse_exact(u, r.bank) : inverse_approx(u, r.bank);
  });
  if (c.vesselness == "frangi") {
    r.vessel = stage("vesselness", [&] { return frangi2d(r.enhanced, c.vessel); });
  } else if (c.vesselness == "se2") {
    r.vessel = stage("vesselness", [&] {
      if (c.vessel_layer < 0 || c.vessel_layer >= u.m) throw ConfigError("vesselness.layer out of range");
      return project_max(se2_vesselness(extract_layer(u, c.vessel_layer), c.vessel));
    });
  } else if (c.vesselness == "sim2") {
    r.vessel = stage("vesselness", [&] {
      VesselnessParams v = c.vessel;
      v.sigma2_mode = Sigma2Mode::scale_adapted;
      return sim2_vesselness(u, v);
    });
  }
  r.volume = std::move(u);
  return r;
}

inline uint64_t image_hash(const Image& f) { return fnv1a(f.data.data(), f.data.size() * sizeof(double)); }

inline nlohmann::ordered_json config_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  for (const auto& [sec, body] : to_ptree(c))
    for (const auto& [key, node] : body) j[sec][key] = node.data();
  return j;
}

/// Writes a JSON sidecar next to an output: tool, command, parameters, seed, tolerances.
inline void write_provenance(const std::string& path, const std::string& command, const nlohmann::ordered_json& params,
                             const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json j;
  j["tool"] = "msos";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["parameters"] = params;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  const std::string s = j.dump(2) + "\n";
  io::write_file(path, s.data(), s.size());
}

/// Stages outputs under temporary names and renames them only when every write succeeded.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& [tmp, fin] : files_) std::filesystem::remove(tmp, ec);
  }
  std::string add(const std::string& name) {
    const auto fin = dir_ / name;
    const auto tmp = dir_ / (name + ".partial");
    files_.emplace_back(tmp, fin);
    return tmp.string();
  }
  std::vector<std::string> commit() {
    std::vector<std::string> names;
    for (const auto& [tmp, fin] : files_) {
      std::filesystem::rename(tmp, fin);
      names.push_back(fin.string());
    }
    committed_ = true;
    return names;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> files_;
  bool committed_ = false;
};

inline void write_outputs(const std::string& stem, OutputSet& out, const Image& img, const std::vector<std::string>& formats,
                          bool display_normalize) {
  for (const auto& f : formats) {
    if (f == "raw") io::write_raw(out.add(stem + ".raw"), img);
    else if (f == "png") io::write_png(out.add(stem + ".png"), display_normalize ? io::normalize_display(img) : img);
    else if (f == "pgm") io::write_pgm(out.add(stem + ".pgm"), display_normalize ? io::normalize_display(img) : img, 16);
  }
}

/// Disk pipeline: reads io.input, writes enhanced image(s), optional volume and vesselness,
/// diagnostics.csv and provenance.json into io.output_dir.
inline std::vector<std::string> run_pipeline_to_disk(const PipelineConfig& c, const std::string& command) {
  validate(c);
  if (c.input.empty()) throw ConfigError("io.input is empty");
  const Image input = stage("read", [&] { return io::read_image(c.input); });
  const PipelineResult r = run_pipeline(input, c);

  std::filesystem::create_directories(c.output_dir);
  OutputSet out(c.output_dir);
  stage("write", [&] {
    write_outputs("enhanced", out, r.enhanced, c.formats, true);
    if (c.vesselness != "none") write_outputs("vesselness", out, r.vessel, c.formats, false);
    if (c.save_volume) io::save_volume(out.add("volume.mssv"), r.volume);
    std::string csv = "key,value\n";
    csv += "cond_bound," + cfg::fmt(r.cond_bound) + "\n";
    csv += "plancherel_residual," + cfg::fmt(r.plancherel) + "\n";
    csv += "annulus_leakage," + cfg::fmt(max_annulus_leakage(r.bank)) + "\n";
    if (c.enhance == "ced-sos")
      for (size_t l = 0; l < c.ced.times.size(); ++l) {
        const size_t src = c.ced.times_fine_last ? c.ced.times.size() - 1 - l : l;
        csv += "time_layer_" + std::to_string(l) + "," + cfg::fmt(c.ced.times[src]) + "\n";
      }
    const std::string dpath = out.add("diagnostics.csv");
    io::write_file(dpath, csv.data(), csv.size());
    nlohmann::ordered_json extra;
    extra["seed"] = c.seed;
    extra["input"] = {{"path", c.input}, {"width", input.width}, {"height", input.height},
                      {"fnv1a", image_hash(input)}};
    extra["bank_hash"] = r.bank.hash;
    extra["tolerances"] = {{"kernel_truncation", kTruncationTarget}, {"curvature_eps", kCurvatureEps},
                           {"singular_eps", kEpsSing}};
    write_provenance(out.add("provenance.json"), command, config_json(c), extra);
    return 0;
  });
  return out.commit();
}

}  // namespace msos
