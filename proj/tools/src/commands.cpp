#include "crowdloss/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "crowdloss/cli/svg.hpp"
#include "crowdloss/error.hpp"
#include "crowdloss/evalkit.hpp"
#include "crowdloss/io.hpp"
#include "crowdloss/parallel.hpp"

namespace crowdloss::cli {

namespace fs = std::filesystem;
using io::format_real;

namespace {

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  return os;
}

std::string padded(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", k);
  return buf;
}

std::vector<LossVariant> variants_of(const std::vector<std::string>& names, const CompositeConfig& base) {
  std::vector<LossVariant> out;
  for (const auto& n : names) out.push_back(make_variant(n, base));
  return out;
}

// Reports aborted seeds; true if any run aborted.
bool report_aborts(const std::vector<SeedRun>& runs, std::ostream& log) {
  bool aborted = false;
  for (const auto& r : runs) {
    if (!r.abort_message.empty()) {
      log << "abort: " << r.abort_message << "\n";
      aborted = true;
    }
  }
  return aborted;
}

const char* map_name(MapKind k) {
  switch (k) {
    case MapKind::Flat: return "flat";
    case MapKind::Indicator: return "indicator";
    case MapKind::Bumps: return "bumps";
    case MapKind::File: return "file";
  }
  return "?";
}

SubsetFilter subset_by_name(const std::string& name) {
  if (name == "all") return SubsetFilter::all();
  if (name == "reasonable") return SubsetFilter::reasonable();
  if (name == "heavy") return SubsetFilter::heavy();
  if (name == "partial") return SubsetFilter::partial();
  if (name == "bare") return SubsetFilter::bare();
  throw ConfigError("config: unknown eval subset '" + name + "'");
}

}  // namespace

int cmd_gradcheck(const RunConfig& cfg, const CommandOptions&, std::ostream& log) {
  GradCheckOptions opts = cfg.gradcheck;
  opts.threads = thread_budget();
  const GradCheckReport rep = run_gradcheck(opts);

  auto csv = open_output(cfg.out / "gradcheck.csv");
  csv << "term,scenes,max_rel_error,mean_rel_error\n";
  for (const auto& t : rep.terms) {
    csv << t.term << "," << t.scenes << "," << format_real(t.max_rel_error) << "," << format_real(t.mean_rel_error)
        << "\n";
    log << std::left << std::setw(22) << t.term << " max " << t.max_rel_error << "  mean " << t.mean_rel_error << "\n";
  }
  auto warn = open_output(cfg.out / "gradcheck_warnings.txt");
  for (const auto& w : rep.warnings) {
    warn << w << "\n";
    log << "warning: " << w << "\n";
  }
  const bool ok = rep.passed(opts.tolerance);
  log << (ok ? "PASS" : "FAIL") << ": max relative error " << rep.max_error() << " (tolerance " << opts.tolerance
      << ") over " << opts.scenes << " scenes in " << std::fixed << std::setprecision(2) << rep.seconds << " s\n"
      << std::defaultfloat;
  return ok ? kExitOk : kExitFailed;
}

int cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto variants = variants_of(cfg.variants, cfg.loss);
  const auto runs = run_suite(cfg.sim, variants, cfg.cou, cfg.seeds, thread_budget());

  {
    auto csv = open_output(cfg.out / "simulate.csv");
    csv << "seed,scene_id,variant,drift_rate,mean_final_iou,overlap_occupancy,initial_loss,final_loss,steps_run,"
           "kink_warnings\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
      for (std::size_t v = 0; v < runs[k].results.size(); ++v) {
        const SimResult& r = runs[k].results[v];
        csv << runs[k].seed << "," << k << "," << variants[v].name << "," << format_real(r.drift_rate) << ","
            << format_real(r.mean_final_iou) << "," << format_real(r.overlap_occupancy) << ","
            << format_real(r.initial_loss()) << "," << format_real(r.final_loss()) << "," << r.steps_run << ","
            << r.kink_warnings << "\n";
      }
    }
  }
  if (report_aborts(runs, log)) return kExitAborted;

  for (std::size_t k = 0; k < runs.size(); ++k) {
    auto os = open_output(cfg.out / ("scene_" + padded(k) + ".txt"));
    io::write_scene(os, runs[k].scene);
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<Detection> dets;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const SceneOutcome o = scene_outcome(runs[k], v, static_cast<int>(k));
      dets.insert(dets.end(), o.detections.begin(), o.detections.end());
    }
    auto os = open_output(cfg.out / ("detections_" + variants[v].name + ".csv"));
    io::write_detections_csv(os, dets);
  }

  const double n = static_cast<double>(runs.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    double drift = 0.0, miou = 0.0, occ = 0.0;
    for (const auto& r : runs) {
      drift += r.results[v].drift_rate;
      miou += r.results[v].mean_final_iou;
      occ += r.results[v].overlap_occupancy;
    }
    log << std::left << std::setw(10) << variants[v].name << " drift " << drift / n << "  mean IoU " << miou / n
        << "  overlap occupancy " << occ / n << "\n";
  }

  if (opts.svg) {
    std::vector<Series> series;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      Series s{variants[v].name, {}, {}};
      std::size_t len = 0;
      for (const auto& r : runs) len = std::max(len, r.results[v].curve.size());
      for (std::size_t t = 0; t < len; ++t) {
        double sum = 0.0;
        // Early-stopped runs hold their last value.
        for (const auto& r : runs) {
          const auto& c = r.results[v].curve;
          sum += c[std::min(t, c.size() - 1)].total;
        }
        s.x.push_back(static_cast<double>(t));
        s.y.push_back(sum / n);
      }
      series.push_back(std::move(s));
    }
    auto os = open_output(cfg.out / "simulate_loss.svg");
    write_line_plot(os, {"Mean loss during descent", "step", "loss"}, series);
  }
  return kExitOk;
}

int cmd_nms_sweep(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
  const auto variants = variants_of(cfg.nms_variants, cfg.loss);
  const auto runs = run_suite(cfg.sim, variants, cfg.cou, cfg.seeds, thread_budget());
  if (report_aborts(runs, log)) return kExitAborted;

  std::vector<VariantOutcome> outcomes;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    VariantOutcome o{variants[v].name, {}};
    for (std::size_t k = 0; k < runs.size(); ++k) o.scenes.push_back(scene_outcome(runs[k], v, static_cast<int>(k)));
    outcomes.push_back(std::move(o));
  }
  const NmsSensitivity res = nms_sensitivity_experiment(outcomes, cfg.nms_thresholds, cfg.match_iou);

  {
    auto csv = open_output(cfg.out / "nms_sweep.csv");
    csv << "variant,threshold,kept,true_positives,false_positives,misses,miss_rate\n";
    for (const auto& r : res.rows) {
      csv << r.variant << "," << format_real(r.threshold) << "," << r.kept << "," << r.true_positives << ","
          << r.false_positives << "," << r.misses << "," << format_real(r.miss_rate) << "\n";
    }
  }
  {
    auto csv = open_output(cfg.out / "nms_summary.csv");
    csv << "variant,min_misses,max_misses,spread,variance\n";
    for (const auto& s : res.summary) {
      csv << s.variant << "," << s.min_misses << "," << s.max_misses << "," << s.spread << ","
          << format_real(s.variance) << "\n";
      log << std::left << std::setw(10) << s.variant << " misses " << s.min_misses << ".." << s.max_misses
          << "  spread " << s.spread << "  variance " << s.variance << "\n";
    }
  }
  if (opts.svg) {
    std::vector<Series> series;
    for (const auto& v : variants) {
      Series s{v.name, {}, {}};
      for (const auto& r : res.rows) {
        if (r.variant != v.name) continue;
        s.x.push_back(r.threshold);
        s.y.push_back(r.miss_rate);
      }
      series.push_back(std::move(s));
    }
    auto os = open_output(cfg.out / "nms_sweep.svg");
    write_line_plot(os, {"Miss rate across NMS thresholds", "NMS threshold", "miss rate"}, series);
  }
  return kExitOk;
}

int cmd_anchor_demo(const RunConfig& cfg, const CommandOptions&, std::ostream& log) {
  const AnchorDemoConfig& ac = cfg.anchors;
  struct Case {
    std::uint64_t seed;
    Scene scene;
    ProbabilityMap map;
  };
  std::vector<Case> cases;
  if (ac.map == MapKind::File) {
    if (ac.map_file.empty() || ac.scene_file.empty()) {
      throw ConfigError("config: anchors.map = file needs anchors.map_file and anchors.scene_file");
    }
    std::ifstream in(ac.map_file);
    if (!in) throw ConfigError("cannot open '" + ac.map_file.string() + "'");
    cases.push_back({0, io::load_scene(ac.scene_file.string()), io::read_probability_map(in)});
  } else {
    for (std::uint64_t seed : cfg.seeds) {
      Scene scene = generate_scene(cfg.sim.scene, seed);
      const int w = ac.bumps.width, h = ac.bumps.height;
      const double stride = scene.width / w;
      ProbabilityMap map = [&]() {
        switch (ac.map) {
          case MapKind::Flat: return ProbabilityMap(w, h, stride, ac.flat_value);
          case MapKind::Indicator: return indicator_map(scene, w, h, stride);
          default: return bump_map(scene, ac.bumps, map_seed(seed));
        }
      }();
      cases.push_back({seed, std::move(scene), std::move(map)});
    }
  }

  auto csv = open_output(cfg.out / "anchor_demo.csv");
  csv << "seed,map,threshold,retained_cells,total_cells,fallback,selected_negatives,selected_hits,selected_fraction,"
         "uniform_negatives,uniform_hits,uniform_fraction,positive_anchors,negative_anchors,positive_cells,"
         "ignored_cells,negative_cells,location_loss\n";
  double sel_sum = 0.0, uni_sum = 0.0, kept_sum = 0.0;
  for (const Case& c : cases) {
    const AnchorSet sel = select_anchors(c.map, ac.spec);
    const AnchorSet uni = all_cell_anchors(c.map, ac.spec);
    const NegativeStats st = negative_informativeness(sel, uni, c.scene, ac.negative_iou);
    const LabeledAnchors la =
        training_anchors(c.map, ac.spec, c.scene, ac.restrict_positives, ac.positive_iou, ac.negative_iou);
    const TargetMap tm = build_target_map(c.scene, c.map.width(), c.map.height(), c.map.stride());
    const double loc = location_branch_loss(c.map, tm, cfg.loss);

    csv << c.seed << "," << map_name(ac.map) << "," << format_real(sel.threshold) << "," << sel.retained_cells << ","
        << sel.total_cells << "," << (sel.fallback ? 1 : 0) << "," << st.selected_negatives << "," << st.selected_hits
        << "," << format_real(st.selected_fraction) << "," << st.uniform_negatives << "," << st.uniform_hits << ","
        << format_real(st.uniform_fraction) << "," << la.positives.size() << "," << la.negatives.size() << ","
        << tm.count(CellLabel::Positive) << "," << tm.count(CellLabel::Ignored) << ","
        << tm.count(CellLabel::Negative) << "," << format_real(loc) << "\n";

    const std::string tag = std::to_string(c.seed);
    auto pm = open_output(cfg.out / "maps" / ("probability_" + tag + ".txt"));
    io::write_probability_map(pm, c.map);
    auto tmo = open_output(cfg.out / "maps" / ("target_" + tag + ".txt"));
    io::write_target_map(tmo, tm);

    sel_sum += st.selected_fraction;
    uni_sum += st.uniform_fraction;
    kept_sum += static_cast<double>(sel.retained_cells) / static_cast<double>(sel.total_cells);
    if (sel.fallback) log << "seed " << c.seed << ": no cell above the threshold, fell back to all cells\n";
  }
  const double n = static_cast<double>(cases.size());
  log << "mean retained fraction " << kept_sum / n << "  distractor-hit fraction selected " << sel_sum / n
      << " vs uniform " << uni_sum / n << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const CommandOptions&, std::ostream& log) {
  const EvalConfig& ec = cfg.eval;
  if (ec.detections.empty() || ec.scenes.empty()) {
    throw ConfigError("config: eval needs eval.detections and eval.scenes");
  }
  const SubsetFilter filter = subset_by_name(ec.subset);
  std::ifstream in(ec.detections);
  if (!in) throw ConfigError("cannot open '" + ec.detections.string() + "'");
  std::vector<Detection> dets = io::read_detections_csv(in);

  std::vector<std::vector<EvalGt>> gts;
  std::size_t evaluated = 0;
  for (const auto& path : ec.scenes) {
    const Scene s = io::load_scene(path.string());
    std::vector<EvalGt> g;
    for (const auto& p : s.pedestrians) {
      const double vis = p.visible.area() / p.full.area();
      g.push_back({p.full, !filter.accepts(p.full.height(), vis)});
      evaluated += g.back().ignore ? 0 : 1;
    }
    gts.push_back(std::move(g));
  }
  if (ec.nms_threshold > 0.0) dets = greedy_nms(dets, ec.nms_threshold);

  const EvalCurve curve = fppi_curve(dets, gts, ec.iou_threshold);
  const double mr = log_average_miss_rate(curve);
  const auto fppi01 = fppi_at_miss_rate(curve, 0.1);
  {
    auto os = open_output(cfg.out / "curve.csv");
    io::write_curve_csv(os, curve);
  }
  auto os = open_output(cfg.out / "eval_summary.csv");
  os << "detections,scenes,evaluated_gts,subset,log_average_miss_rate,fppi_at_miss_rate_0.1\n";
  os << dets.size() << "," << gts.size() << "," << evaluated << "," << ec.subset << "," << format_real(mr) << ","
     << (fppi01 ? format_real(*fppi01) : std::string("nan")) << "\n";
  log << "MR-2 " << mr * 100.0 << "% over " << gts.size() << " scenes (" << evaluated << " GTs, subset "
      << ec.subset << ")\n";
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"crowdloss: CouLoss gradient checks, crowd simulations and evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds;
  bool svg = false;
  using Fn = int (*)(const RunConfig&, const CommandOptions&, std::ostream&);
  std::vector<std::pair<CLI::App*, Fn>> commands;
  auto add = [&](const char* name, const char* help, Fn fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI-style configuration file");
    sub->add_option("--out", out_dir, "output directory (overrides run.out)");
    sub->add_option("--seeds", seeds, "comma-separated seeds or ranges, e.g. 1-20 (overrides run.seeds)");
    sub->add_flag("--svg", svg, "also write an SVG plot");
    commands.emplace_back(sub, fn);
  };
  add("gradcheck", "analytic gradients vs central finite differences", cmd_gradcheck);
  add("simulate", "paired descent runs per seed and loss variant", cmd_simulate);
  add("nms-sweep", "miss counts across NMS thresholds", cmd_nms_sweep);
  add("anchor-demo", "anchor location selection statistics", cmd_anchor_demo);
  add("eval", "FPPI curve and log-average miss rate of a detection CSV", cmd_eval);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
    cfg.validate();
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) return fn(cfg, CommandOptions{svg}, out);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InfeasibleConfig& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalAbort& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kExitAborted;
  } catch (const NoForce& e) {
    err << "numerical abort: " << e.what() << "\n";
    return kExitAborted;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace crowdloss::cli
