// msos: batch front end for multi-scale orientation scores.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <numeric>

#include <msos/calculus.hpp>
#include <msos/config.hpp>
#include <msos/cwt.hpp>
#include <msos/diffusion.hpp>
#include <msos/errors.hpp>
#include <msos/pipeline.hpp>
#include <msos/plot.hpp>
#include <msos/vesselness.hpp>
#include <msos/wavelets.hpp>

using namespace msos;
using json = nlohmann::ordered_json;

namespace {

std::string g_command;

void add_bank_options(CLI::App* app, BankConfig& b) {
  app->add_option("--n", b.n, "orientations N")->capture_default_str();
  app->add_option("--m", b.m, "scales M")->capture_default_str();
  app->add_option("--k", b.k, "B-spline order")->capture_default_str();
  app->add_option("--rho-minus", b.rho_minus, "inner annulus radius (0: 4 pi / width)");
  app->add_option("--rho-plus", b.rho_plus, "outer annulus radius (0: 0.8 pi)");
  app->add_option("--sigma-s", b.sigma_s, "spatial window std at a = 1 (0: min(w,h)/8, inf: none)");
  app->add_option("--recon-floor", b.recon_floor, "reconstruction band threshold")->capture_default_str();
}

json bank_json(const BankParams& p) {
  return {{"n_orientations", p.n_orientations}, {"n_scales", p.n_scales}, {"spline_order", p.spline_order},
          {"rho_minus", p.rho_minus},          {"rho_plus", p.rho_plus}, {"sigma_s", cfg::fmt(p.sigma_s)},
          {"recon_floor", p.recon_floor},      {"width", p.width},       {"height", p.height}};
}

json diffusion_json(const DiffusionParams& d) {
  return {{"d11", d.d11}, {"d22", d.d22}, {"d33", d.d33}, {"d44", d.d44}, {"t", d.t}};
}

json ced_json(const CedParams& c) {
  return {{"rho_s", c.rho_s}, {"rho_tilde", c.rho_tilde}, {"beta", c.beta}, {"c", c.c}, {"dt", c.dt},
          {"times", c.times}, {"enforce_horizontality", c.enforce_horizontality},
          {"times_fine_last", c.times_fine_last}};
}

bool is_volume(const std::string& path) { return io::extension(path) == "mssv"; }

WaveletBank bank_for(const std::string& bank_path, const BankConfig& bc, int w, int h) {
  if (!bank_path.empty()) {
    WaveletBank b = io::load_bank(bank_path);
    if (b.params.width != w || b.params.height != h) throw ConfigError("bank grid does not match the input grid");
    return b;
  }
  return build_bank(resolve_bank(bc, w, h));
}

// ---- wavelets ----

void plot_profiles(const BankParams& p, const std::string& prefix) {
  const int kr = p.radial_order();
  const double lo = std::log(p.rho_minus) - 0.5, hi = std::log(p.rho_plus) + 0.5;
  const int n = 800;
  std::vector<plot::Series> copies, sq;
  plot::Series sum, sqsum;
  for (int l = 0; l < p.n_scales; ++l) {
    plot::Series s, r;
    s.color = r.color = plot::palette()[l % plot::palette().size()];
    for (int i = 0; i <= n; ++i) {
      const double lr = lo + (hi - lo) * i / n;
      const double v = bspline(kr, (lr + p.log_scale(l)) / p.s_rho());
      s.x.push_back(lr);
      s.y.push_back(v);
      r.x.push_back(lr);
      r.y.push_back(std::sqrt(v));
    }
    copies.push_back(s);
    sq.push_back(r);
  }
  for (int i = 0; i <= n; ++i) {
    double a = 0, b = 0;
    for (int l = 0; l < p.n_scales; ++l) a += copies[l].y[i], b += sq[l].y[i];
    sum.x.push_back(copies[0].x[i]);
    sum.y.push_back(a);
    sqsum.x.push_back(copies[0].x[i]);
    sqsum.y.push_back(b);
  }
  plot::line_plot(prefix + "_bsplines.png", copies, 0, 1.1);
  plot::line_plot(prefix + "_bspline_sum.png", {sum}, 0, 1.2, 1.0);
  plot::line_plot(prefix + "_sqrt_bsplines.png", sq, 0, 1.1);
  plot::line_plot(prefix + "_sqrt_sum.png", {sqsum}, 0, 2.0, 1.0);
  plot::Series ang;
  ang.color = plot::palette()[0];
  for (int i = 0; i <= n; ++i) {
    const double phi = 2 * std::numbers::pi * i / n;
    ang.x.push_back(phi);
    ang.y.push_back(angular_profile(phi, p));
  }
  plot::line_plot(prefix + "_angular.png", {ang}, 0, 1.1);
}

void cmd_wavelets(CLI::App& app) {
  auto* w = app.add_subcommand("wavelets", "build or inspect a wavelet bank")->require_subcommand(1);

  static BankConfig bc;
  static int width = 128, height = 128;
  static std::string out, bank_path, plot_prefix, csv;
  auto* build = w->add_subcommand("build", "build a bank and save it");
  add_bank_options(build, bc);
  build->add_option("--width", width)->capture_default_str();
  build->add_option("--height", height)->capture_default_str();
  build->add_option("--out", out, "bank file")->required();
  build->callback([] {
    const auto bank = build_bank(resolve_bank(bc, width, height));
    io::save_bank(out, bank);
    const auto d = condition_diagnostics(bank);
    std::printf("bank %dx%d N=%d M=%d hash=%016llx cond_bound=%.12g\n", width, height, bank.n(), bank.m(),
                static_cast<unsigned long long>(bank.hash), d.cond_bound);
    write_provenance(out + ".json", g_command, bank_json(bank.params), {{"bank_hash", bank.hash}});
  });

  auto* insp = w->add_subcommand("inspect", "condition number, annuli and profile plots");
  add_bank_options(insp, bc);
  insp->add_option("--bank", bank_path, "bank file (otherwise built from options)");
  insp->add_option("--width", width)->capture_default_str();
  insp->add_option("--height", height)->capture_default_str();
  insp->add_option("--plot-profiles", plot_prefix, "write B-spline and angular profile plots with this prefix");
  insp->add_option("--csv", csv, "write a key,value table");
  insp->callback([] {
    const auto bank = bank_path.empty() ? build_bank(resolve_bank(bc, width, height)) : io::load_bank(bank_path);
    const auto d = condition_diagnostics(bank);
    const auto [i0, i1] = interior_radii(bank.params);
    const auto [r0, r1] = reconstruction_radii(bank.params);
    std::string t = "key,value\n";
    auto row = [&](const char* k, double v) {
      std::printf("%-20s %.12g\n", k, v);
      t += std::string(k) + "," + cfg::fmt(v) + "\n";
    };
    row("sup_m_psi", d.sup_m);
    row("inf_m_psi", d.inf_m);
    row("cond_bound", d.cond_bound);
    row("annulus_leakage", max_annulus_leakage(bank));
    row("interior_lo", i0);
    row("interior_hi", i1);
    row("recon_lo", r0);
    row("recon_hi", r1);
    row("a_minus", bank.params.a_minus);
    row("a_plus", bank.params.a_plus);
    if (!csv.empty()) io::write_file(csv, t.data(), t.size());
    if (!plot_prefix.empty()) plot_profiles(bank.params, plot_prefix);
  });
}

// ---- transform ----

void cmd_transform(CLI::App& app) {
  auto* t = app.add_subcommand("transform", "forward or inverse wavelet transform")->require_subcommand(1);
  static BankConfig bc;
  static std::string in, out, bank_path;
  static bool approx = false;
  auto* fw = t->add_subcommand("forward", "image -> score volume");
  add_bank_options(fw, bc);
  fw->add_option("--in", in)->required();
  fw->add_option("--out", out, ".mssv volume")->required();
  fw->add_option("--bank", bank_path);
  fw->callback([] {
    const Image f = io::read_image(in);
    const auto bank = bank_for(bank_path, bc, f.width, f.height);
    io::save_volume(out, forward(f, bank));
    write_provenance(out + ".json", g_command, bank_json(bank.params), {{"bank_hash", bank.hash}, {"input", in}});
  });
  auto* iv = t->add_subcommand("inverse", "score volume -> image");
  add_bank_options(iv, bc);
  iv->add_option("--in", in)->required();
  iv->add_option("--out", out)->required();
  iv->add_option("--bank", bank_path);
  auto* fa = iv->add_flag("--approx", approx, "approximate reconstruction (weighted sum over the score)");
  iv->add_flag("--exact", "exact reconstruction (default)")->excludes(fa);
  iv->callback([] {
    const auto u = io::load_volume(in);
    auto bank = bank_for(bank_path, bc, u.width, u.height);
    if (bank.hash != u.bank_hash) throw ConfigError("volume was computed with a different bank (hash mismatch)");
    const Image g = approx ? inverse_approx(u, bank) : inverse_exact(u, bank);
    io::write_image(out, io::extension(out) == "raw" || io::extension(out) == "f32" ? g : io::normalize_display(g));
    write_provenance(out + ".json", g_command, bank_json(bank.params), {{"inverse", approx ? "approx" : "exact"}});
  });
}

// ---- enhance ----

void enhance_run(const PipelineConfig& c, const std::string& in, const std::string& out, const std::string& bank_path) {
  if (is_volume(in)) {
    const auto u = io::load_volume(in);
    ScoreVolume v = u;
    if (c.enhance == "linear") {
      const double s_rho = u.m > 1 ? u.log_scales[1] - u.log_scales[0] : 1.0;
      const KernelGrid g{1.0, c.kernel_rx, u.n, s_rho, c.kernel_rtau};
      v = linear_diffuse(u, build_kernel_stack(c.linear, g));
    } else {
      v = ced_sos(u, c.ced);
    }
    if (!is_volume(out)) throw ConfigError("volume input needs a .mssv output");
    io::save_volume(out, v);
  } else {
    const Image f = io::read_image(in);
    PipelineConfig pc = c;
    if (!bank_path.empty()) {
      const auto b = io::load_bank(bank_path);
      pc.bank = {b.params.n_orientations, b.params.n_scales, b.params.spline_order, b.params.rho_minus,
                 b.params.rho_plus,       b.params.sigma_s,  b.params.recon_floor};
    }
    const auto r = run_pipeline(f, pc);
    if (is_volume(out)) {
      io::save_volume(out, r.volume);
    } else {
      const auto e = io::extension(out);
      io::write_image(out, e == "raw" || e == "f32" ? r.enhanced : io::normalize_display(r.enhanced));
    }
  }
}

void cmd_enhance(CLI::App& app) {
  auto* e = app.add_subcommand("enhance", "left-invariant evolutions on the score")->require_subcommand(1);
  static PipelineConfig c;
  static std::string in, out, bank_path, times;
  auto* lin = e->add_subcommand("linear", "linear diffusion with the Gaussian-estimate kernel");
  add_bank_options(lin, c.bank);
  lin->add_option("--in", in, "image or .mssv volume")->required();
  lin->add_option("--out", out)->required();
  lin->add_option("--bank", bank_path);
  lin->add_option("--D11", c.linear.d11)->capture_default_str();
  lin->add_option("--D22", c.linear.d22)->capture_default_str();
  lin->add_option("--D44", c.linear.d44)->capture_default_str();
  lin->add_option("--t", c.linear.t)->capture_default_str();
  lin->add_option("--rx", c.kernel_rx, "spatial kernel radius at unit scale")->capture_default_str();
  lin->add_option("--rtau", c.kernel_rtau, "kernel radius in scale steps")->capture_default_str();
  lin->callback([] {
    c.enhance = "linear";
    enhance_run(c, in, out, bank_path);
    write_provenance(out + ".json", g_command,
                     {{"bank", config_json(c)["bank"]}, {"diffusion", diffusion_json(c.linear)},
                      {"kernel_rx", c.kernel_rx}, {"kernel_rtau", c.kernel_rtau}},
                     {{"input", in}});
  });

  auto* ced = e->add_subcommand("ced-sos", "coherence-enhancing diffusion per scale layer");
  add_bank_options(ced, c.bank);
  ced->add_option("--in", in, "image or .mssv volume")->required();
  ced->add_option("--out", out)->required();
  ced->add_option("--bank", bank_path);
  ced->add_option("--times", times, "comma-separated stopping time per scale (default 0,2,6,12)");
  ced->add_option("--rho-s", c.ced.rho_s)->capture_default_str();
  ced->add_option("--rho-tilde", c.ced.rho_tilde)->capture_default_str();
  ced->add_option("--beta", c.ced.beta)->capture_default_str();
  ced->add_option("--c", c.ced.c)->capture_default_str();
  ced->add_option("--dt", c.ced.dt)->capture_default_str();
  ced->add_flag("--horizontal", c.ced.enforce_horizontality, "enforce horizontality (d_H = 0)");
  ced->add_flag("--fine-last", c.ced.times_fine_last, "times list runs from the coarsest scale to the finest");
  ced->callback([] {
    c.enhance = "ced-sos";
    if (!times.empty()) c.ced.times = cfg::parse_list(times, "--times");
    enhance_run(c, in, out, bank_path);
    write_provenance(out + ".json", g_command, {{"bank", config_json(c)["bank"]}, {"ced", ced_json(c.ced)}},
                     {{"input", in}});
  });
}

// ---- vesselness ----

void cmd_vesselness(CLI::App& app) {
  auto* v = app.add_subcommand("vesselness", "vessel likelihood maps")->require_subcommand(1);
  static VesselnessParams p;
  static BankConfig bc;
  static std::string in, out, csv, polarity = "dark", scales, mode;
  static int layer = 0;
  auto common = [](CLI::App* s) {
    s->add_option("--in", in, "image (or .mssv volume for se2/sim2)")->required();
    s->add_option("--out", out)->required();
    s->add_option("--polarity", polarity, "dark or bright vessels")->capture_default_str();
    s->add_option("--sigma1", p.sigma1)->capture_default_str();
    s->add_option("--sigma2", p.sigma2_value, "sigma2 value or fraction")->capture_default_str();
    s->add_option("--sigma2-mode", mode, "fixed | max_fraction | scale_adapted");
    s->add_option("--csv", csv, "per-pixel response dump");
  };
  auto finish = [](const std::string& kind, const Image& img) {
    io::write_image(out, img);
    if (!csv.empty()) {
      std::string t = "x,y,v\n";
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          t += std::to_string(x) + "," + std::to_string(y) + "," + cfg::fmt(img.at(x, y)) + "\n";
      io::write_file(csv, t.data(), t.size());
    }
    PipelineConfig pc;
    pc.vessel = p;
    write_provenance(out + ".json", g_command, {{"filter", kind}, {"vesselness", config_json(pc)["vesselness"]}},
                     {{"input", in}});
  };
  auto setup = [] {
    if (polarity != "dark" && polarity != "bright") throw ConfigError("--polarity must be dark or bright");
    p.bright = polarity == "bright";
    if (!mode.empty()) p.sigma2_mode = cfg::parse_mode(mode);
    if (!scales.empty()) p.frangi_scales = cfg::parse_list(scales, "--scales");
  };
  auto score = [](const VesselnessParams&) {
    if (is_volume(in)) return io::load_volume(in);
    Image f = io::read_image(in);
    return forward(f, build_bank(resolve_bank(bc, f.width, f.height)));
  };

  auto* fr = v->add_subcommand("frangi", "image-domain multi-scale filter");
  common(fr);
  fr->add_option("--scales", scales, "comma-separated Gaussian scales t = sigma^2/2");
  fr->callback([finish, setup] {
    setup();
    finish("frangi", frangi2d(io::read_image(in), p));
  });

  auto* se = v->add_subcommand("se2", "gauge-frame filter on one score layer");
  common(se);
  add_bank_options(se, bc);
  se->add_option("--layer", layer, "scale layer index")->capture_default_str();
  se->add_option("--rho-tilde", p.rho_tilde)->capture_default_str();
  se->add_option("--beta", p.beta)->capture_default_str();
  se->callback([finish, setup, score] {
    setup();
    const auto u = score(p);
    if (layer < 0 || layer >= u.m) throw ConfigError("--layer out of range");
    finish("se2", project_max(se2_vesselness(extract_layer(u, layer), p)));
  });

  auto* si = v->add_subcommand("sim2", "per-layer gauge filter with scale-adapted sigma2");
  common(si);
  add_bank_options(si, bc);
  si->add_option("--rho-tilde", p.rho_tilde)->capture_default_str();
  si->add_option("--beta", p.beta)->capture_default_str();
  si->callback([finish, setup, score] {
    setup();
    p.sigma2_mode = Sigma2Mode::scale_adapted;
    finish("sim2", sim2_vesselness(score(p), p));
  });
}

// ---- simulate / kernel ----

void add_diffusion_options(CLI::App* s, DiffusionParams& d) {
  s->add_option("--D11", d.d11)->capture_default_str();
  s->add_option("--D22", d.d22)->capture_default_str();
  s->add_option("--D44", d.d44)->capture_default_str();
  s->add_option("--t", d.t)->capture_default_str();
}

void add_grid_options(CLI::App* s, KernelGrid& g) {
  s->add_option("--dx", g.dx, "spatial lattice step")->capture_default_str();
  s->add_option("--rx", g.rx, "spatial radius in steps")->capture_default_str();
  s->add_option("--n-theta", g.n_theta, "orientation bins")->capture_default_str();
  s->add_option("--dtau", g.dtau, "log-scale step")->capture_default_str();
  s->add_option("--rtau", g.rtau, "log-scale radius in steps")->capture_default_str();
}

json grid_json(const KernelGrid& g) {
  return {{"dx", g.dx}, {"rx", g.rx}, {"n_theta", g.n_theta}, {"dtau", g.dtau}, {"rtau", g.rtau}};
}

void cmd_simulate(CLI::App& app) {
  auto* s = app.add_subcommand("simulate", "Monte-Carlo simulation")->require_subcommand(1);
  static DiffusionParams d;
  static KernelGrid g{0.5, 8, 72, 0.06, 6};
  static double samples = 1e6;
  static int steps = 100;
  static uint64_t seed = 0;
  static std::string out;
  auto* sde = s->add_subcommand("sde", "sample SDE endpoints and histogram them");
  add_diffusion_options(sde, d);
  add_grid_options(sde, g);
  sde->add_option("--samples", samples)->capture_default_str();
  sde->add_option("--steps", steps)->capture_default_str();
  sde->add_option("--seed", seed)->capture_default_str();
  sde->add_option("--out", out, "histogram file (MSHG: grid header + uint64 counts)")->required();
  sde->callback([] {
    unsigned threads = 0;
    if (const char* e = std::getenv("MSOS_THREADS")) threads = static_cast<unsigned>(std::atoi(e));
    const auto pts = mc_sample_sde(d, static_cast<size_t>(samples), steps, seed, threads);
    const auto h = mc_kernel_histogram(pts, g);
    double vt = 0, vtau = 0, mx = 0, my = 0;
    for (const auto& q : pts) vt += q.theta * q.theta, vtau += q.tau * q.tau, mx += q.x, my += q.y;
    const double n = static_cast<double>(pts.size());
    std::printf("var_theta %.6g (exact %.6g)\nvar_tau %.6g (exact %.6g)\nmean_x %.4g mean_y %.4g\n", vt / n,
                2 * d.d11 * d.t, vtau / n, 2 * d.d44 * d.t, mx / n, my / n);
    std::vector<unsigned char> buf;
    auto put = [&](const void* p, size_t k) {
      const auto* c = static_cast<const unsigned char*>(p);
      buf.insert(buf.end(), c, c + k);
    };
    put("MSHG", 4);
    const int32_t ints[3] = {g.rx, g.n_theta, g.rtau};
    const double dbl[2] = {g.dx, g.dtau};
    const uint64_t total = h.n_samples;
    put(ints, sizeof ints);
    put(dbl, sizeof dbl);
    put(&total, 8);
    put(h.counts.data(), 8 * h.counts.size());
    io::write_file(out, buf.data(), buf.size());
    write_provenance(out + ".json", g_command,
                     {{"diffusion", diffusion_json(d)}, {"grid", grid_json(g)}, {"samples", pts.size()},
                      {"steps", steps}},
                     {{"seed", seed}, {"chunk", kMcChunk}});
  });
}

void cmd_kernel(CLI::App& app) {
  auto* k = app.add_subcommand("kernel", "Gaussian-estimate kernels")->require_subcommand(1);
  static DiffusionParams d;
  static KernelGrid g{0.25, 20, 16, 0.25, 1};
  static double b = 1.0;
  static std::string plot_path, csv;
  auto* est = k->add_subcommand("estimate", "sample the estimate; report truncation; plot slices");
  add_diffusion_options(est, d);
  add_grid_options(est, g);
  est->add_option("--b", b, "exponent calibration")->capture_default_str();
  est->add_option("--plot", plot_path, "heatmaps of spatial slices at each (tau, theta) with mass");
  est->add_option("--csv", csv, "x,y,theta,tau,k table of the normalized stack");
  est->callback([] {
    const auto s = build_kernel_stack(d, g, b);
    std::printf("front_factor %.12g\ndiscarded %.3e\nrequired_rx %d\nrequired_rtau %d\n", estimate_front_factor(d),
                s.discarded, s.required_rx, s.required_rtau);
    const int nx = g.nx();
    if (!plot_path.empty()) {
      std::vector<std::pair<int, int>> slices;
      for (int it = -g.rtau; it <= g.rtau; ++it)
        for (int j = 0; j < g.n_theta; ++j) {
          double m = 0;
          for (int iy = -g.rx; iy <= g.rx; ++iy)
            for (int ix = -g.rx; ix <= g.rx; ++ix) m += s.data[g.index(ix, iy, j, it)];
          if (m > 1e-6) slices.emplace_back(j, it);
        }
      const int cols = static_cast<int>(slices.size()), W = cols * (nx + 1);
      std::vector<double> tile(static_cast<size_t>(W) * nx, 0.0);
      // Each slice is scaled to its own peak.
      for (int c = 0; c < cols; ++c) {
        double mx = 0;
        for (int iy = -g.rx; iy <= g.rx; ++iy)
          for (int ix = -g.rx; ix <= g.rx; ++ix) mx = std::max(mx, s.data[g.index(ix, iy, slices[c].first, slices[c].second)]);
        for (int iy = -g.rx; iy <= g.rx; ++iy)
          for (int ix = -g.rx; ix <= g.rx; ++ix)
            tile[static_cast<size_t>(iy + g.rx) * W + c * (nx + 1) + ix + g.rx] =
                s.data[g.index(ix, iy, slices[c].first, slices[c].second)] / mx;
      }
      plot::heatmap(plot_path, tile, W, nx, 6);
    }
    if (!csv.empty()) {
      std::string t = "x,y,theta,tau,k\n";
      for (size_t i = 0; i < s.data.size(); ++i) {
        if (s.data[i] == 0) continue;
        const auto p = lattice_point(g, i);
        t += cfg::fmt(p.x) + "," + cfg::fmt(p.y) + "," + cfg::fmt(p.theta) + "," + cfg::fmt(p.tau) + "," +
             cfg::fmt(s.data[i]) + "\n";
      }
      io::write_file(csv, t.data(), t.size());
    }
    const std::string side = !plot_path.empty() ? plot_path : !csv.empty() ? csv : "";
    if (!side.empty())
      write_provenance(side + ".json", g_command, {{"diffusion", diffusion_json(d)}, {"grid", grid_json(g)}, {"b", b}},
                       {{"discarded", s.discarded}});
  });
}

// ---- analyze ----

void cmd_analyze(CLI::App& app) {
  auto* a = app.add_subcommand("analyze", "diagnostics")->require_subcommand(1);
  static BankConfig bc;
  static std::string in, out;
  static double beta = 0.058, rho_tilde = 1.5, thr = 0.5;
  static int layer = -1;
  auto* cv = a->add_subcommand("curvature", "exponential-curve fits and curvature per voxel");
  add_bank_options(cv, bc);
  cv->add_option("--in", in, "image or .mssv volume")->required();
  cv->add_option("--layer", layer, "restrict to one scale layer (default: all)");
  cv->add_option("--beta", beta)->capture_default_str();
  cv->add_option("--rho-tilde", rho_tilde)->capture_default_str();
  cv->add_option("--threshold", thr, "summary over voxels with |U| >= threshold * layer max")->capture_default_str();
  cv->add_option("--out", out, "per-voxel CSV: x,y,k,l,kappa,kappa_horizontal,confidence");
  cv->callback([] {
    ScoreVolume u;
    if (is_volume(in)) {
      u = io::load_volume(in);
    } else {
      const Image f = io::read_image(in);
      u = forward(f, build_bank(resolve_bank(bc, f.width, f.height)));
    }
    if (layer >= u.m) throw ConfigError("--layer out of range");
    std::string t = "x,y,k,l,kappa,kappa_horizontal,confidence\n";
    for (int l = std::max(layer, 0); l < (layer < 0 ? u.m : layer + 1); ++l) {
      const auto mag = detail::magnitude(extract_layer(u, l));
      const double mx = *std::max_element(mag.data.begin(), mag.data.end());
      const auto H = hessian3(mag, beta, rho_tilde);
      const auto g = gauge_frame(H, beta, false, false);
      std::vector<double> kf, kh;
      for (size_t v = 0; v < H.size(); ++v) {
        const double kap_h = curvature(best_exp_fit(H[v], beta, true), true).kappa;
        if (!out.empty()) {
          const int x = static_cast<int>(v % mag.width), y = static_cast<int>(v / mag.width % mag.height);
          const int k = static_cast<int>(v / mag.plane_size());
          t += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(k) + "," + std::to_string(l) + "," +
               cfg::fmt(g[v].kappa) + "," + cfg::fmt(kap_h) + "," + cfg::fmt(g[v].confidence) + "\n";
        }
        if (mag.data[v] < thr * mx) continue;
        kf.push_back(std::abs(g[v].kappa));
        kh.push_back(std::abs(kap_h));
      }
      auto med = [](std::vector<double> v) {
        if (v.empty()) return 0.0;
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
      };
      std::printf("layer %d  median|kappa| full %.5g horizontal %.5g  (%zu voxels)\n", l, med(kf), med(kh), kf.size());
    }
    if (!out.empty()) {
      io::write_file(out, t.data(), t.size());
      write_provenance(out + ".json", g_command,
                       {{"beta", beta}, {"rho_tilde", rho_tilde}, {"threshold", thr}, {"layer", layer}},
                       {{"input", in}});
    }
  });
}

// ---- pipeline ----

std::string read_text(const std::string& path) {
  const auto b = io::read_file(path);
  return {b.begin(), b.end()};
}

void cmd_pipeline(CLI::App& app) {
  auto* p = app.add_subcommand("pipeline", "configured end-to-end runs")->require_subcommand(1);
  static std::string config_path, in, out_dir, out;
  auto* run = p->add_subcommand("run", "transform, enhance, reconstruct, vesselness");
  run->add_option("--config", config_path, "INI config")->required();
  run->add_option("--in", in, "override io.input");
  run->add_option("--out-dir", out_dir, "override io.output_dir (else MSOS_OUTPUT_DIR, else config)");
  run->callback([] {
    PipelineConfig c = parse_config(read_text(config_path));
    if (!in.empty()) c.input = in;
    if (!out_dir.empty()) c.output_dir = out_dir;
    else if (const char* e = std::getenv("MSOS_OUTPUT_DIR")) c.output_dir = e;
    for (const auto& f : run_pipeline_to_disk(c, g_command)) std::printf("%s\n", f.c_str());
  });
  auto* init = p->add_subcommand("init", "write the default config");
  init->add_option("--out", out)->required();
  init->callback([] {
    const auto s = serialize(PipelineConfig{});
    io::write_file(out, s.data(), s.size());
  });
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command += (i ? " " : "") + std::string(argv[i]);
  CLI::App app{"msos: multi-scale orientation scores, left-invariant evolutions and vesselness"};
  app.require_subcommand(1);
  cmd_wavelets(app);
  cmd_transform(app);
  cmd_enhance(app);
  cmd_vesselness(app);
  cmd_simulate(app);
  cmd_kernel(app);
  cmd_analyze(app);
  cmd_pipeline(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
