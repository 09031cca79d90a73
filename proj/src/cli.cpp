#include "hbvar/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "hbvar/distributions.hpp"
#include "hbvar/hier_sampler.hpp"
#include "hbvar/io.hpp"

namespace hbvar::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConvergence = 4;

// flags > config file > defaults
template <typename T>
void apply_config(const CLI::App& cmd, const json& cfg, const std::string& key, T& var) {
  if (!cfg.contains(key)) return;
  const CLI::Option* opt = cmd.get_option_no_throw("--" + key);
  if (opt && opt->count() > 0) return;
  var = cfg.at(key).get<T>();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path);
  json j;
  in >> j;
  return j;
}

std::string timestamp_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", std::gmtime(&t));
  return buf;
}

std::string short_hash(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[12];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<uint32_t>(h));
  return buf;
}

struct FitSettings {
  std::string data_path;
  int model = 1;
  int L = 2;
  uint64_t seed = 1;
  std::string out_dir = "out";
  std::string run_name;
  std::string hyper_path;
  double lambda = 0.2;
  double kappa = 0.2;
  int chains = 3;
  int warmup = 200;
  int draws = 500;
  int exact_draws = 1500;
  double fix_nu = 0.0;
  bool no_center = false;
  std::string dof_convention = "corrected";
  std::string model3_mode = "region";
};

struct LoadedGroup {
  GroupDataset dataset;
  LagDesign design;
  ShrinkagePrior prior;
  double lambda;
  VectorXd kappa;
};

LoadedGroup load_and_prepare(const std::string& data_path, int L, bool no_center,
                             const std::string& hyper_path, double lambda,
                             double kappa_scalar) {
  LoadedGroup g;
  g.dataset = io::read_group_manifest(data_path);
  if (!no_center) g.dataset = mean_center(g.dataset);
  g.design = build_group_design(g.dataset, L);
  if (!hyper_path.empty()) {
    TuneResult t = io::read_tune_result(hyper_path);
    g.lambda = t.lambda;
    g.kappa = t.kappa;
    if (g.kappa.size() != g.dataset.S())
      throw Error(Errc::validation,
                  "tuned kappa has " + std::to_string(g.kappa.size()) +
                      " entries, dataset has " + std::to_string(g.dataset.S()));
  } else {
    g.lambda = lambda;
    g.kappa = VectorXd::Constant(g.dataset.S(), kappa_scalar);
  }
  g.prior = build_default_prior(g.dataset, L, g.lambda, g.kappa);
  return g;
}

// One model fit on a prepared group. Returns draws plus the convergence flag
// (true = unreliable).
struct FitOutcome {
  PosteriorDraws draws;
  RhatReport rhat_report;
  bool has_rhat = false;
  bool convergence_warning = false;
};

FitOutcome run_fit(const LoadedGroup& g, const FitSettings& s, Exec policy) {
  FitOutcome out;
  DofConvention conv = s.dof_convention == "paper" ? DofConvention::paper
                                                   : DofConvention::corrected;
  if (s.model == 1) {
    HierFitOptions opts;
    opts.chains = s.chains;
    opts.warmup = s.warmup;
    opts.draws = s.draws;
    opts.seed = s.seed;
    if (s.fix_nu > 0) {
      opts.fix_nu = true;
      opts.nu_fixed = s.fix_nu;
    }
    out.draws = nuts_fit(g.design, g.prior, opts, policy);
    out.draws.L = g.design.L;
    out.draws.region_labels = g.design.region_labels;
    if (s.chains >= 2) {
      out.rhat_report = rhat(out.draws);
      out.has_rhat = true;
      if (out.rhat_report.max_rhat > 1.05 || out.rhat_report.any_nan)
        out.convergence_warning = true;
    }
    if (out.draws.divergence_fraction() > 0.10) out.convergence_warning = true;
  } else {
    auto stats = subject_stats_all(g.design, g.prior, policy);
    ConjugatePosterior post = combine(stats, g.prior, g.design.n, conv);
    out.draws = s.model == 2
                    ? sample_model2(post, s.exact_draws, s.seed)
                    : sample_model3(post, s.exact_draws, s.seed,
                                    s.model3_mode == "paper" ? Model3Mode::paper
                                                             : Model3Mode::per_region);
    out.draws.L = g.design.L;
    out.draws.region_labels = g.design.region_labels;
  }
  return out;
}

json fit_manifest(const FitSettings& s, const LoadedGroup& g, const fs::path& run_dir) {
  json m;
  m["command"] = "fit";
  m["version"] = version_string();
  m["timestamp_utc"] = timestamp_now();
  m["model"] = s.model;
  m["L"] = s.L;
  m["seed"] = s.seed;
  m["chains"] = s.chains;
  m["warmup"] = s.warmup;
  m["draws"] = s.draws;
  m["exact_draws"] = s.exact_draws;
  m["fix_nu"] = s.fix_nu;
  m["centered"] = !s.no_center;
  m["dof_convention"] = s.dof_convention;
  m["model3_mode"] = s.model3_mode;
  m["lambda"] = g.lambda;
  m["kappa"] = std::vector<double>(g.kappa.data(), g.kappa.data() + g.kappa.size());
  m["inputs"] = {{s.data_path, io::file_hash(s.data_path)}};
  m["artifacts"] = {
      {"draws/draws.csv", io::file_hash(run_dir / "draws" / "draws.csv")},
      {"draws/draws.json", io::file_hash(run_dir / "draws" / "draws.json")},
  };
  return m;
}

// Refuses to consume a run whose draw files no longer match the manifest.
void verify_run_artifacts(const fs::path& run_dir) {
  json m;
  std::ifstream in(run_dir / "manifest.json");
  if (!in) throw Error(Errc::io, "missing manifest.json in " + run_dir.string());
  in >> m;
  for (const auto& [rel, hash] : m["artifacts"].items()) {
    std::string actual = io::file_hash(run_dir / rel);
    if (actual != hash.get<std::string>())
      throw Error(Errc::validation,
                  "stale artifact: " + rel + " hash " + actual +
                      " does not match manifest " + hash.get<std::string>());
  }
}

fs::path make_run_dir(const std::string& out_dir, const std::string& run_name,
                      const std::string& config_text) {
  fs::path runs = fs::path(out_dir) / "runs";
  fs::path dir = runs / (run_name.empty()
                             ? timestamp_now() + "-" + short_hash(config_text)
                             : run_name);
  fs::create_directories(dir);
  return dir;
}

int cmd_fit(const FitSettings& s) {
  LoadedGroup g = load_and_prepare(s.data_path, s.L, s.no_center, s.hyper_path,
                                   s.lambda, s.kappa);
  FitOutcome outcome = run_fit(g, s, Exec::par);

  json cfg_echo = {{"model", s.model}, {"L", s.L},     {"seed", s.seed},
                   {"data", s.data_path}, {"chains", s.chains}, {"draws", s.draws}};
  fs::path run_dir = make_run_dir(s.out_dir, s.run_name, cfg_echo.dump());
  io::write_draws(run_dir / "draws", outcome.draws);
  if (outcome.has_rhat)
    io::write_rhat_csv(run_dir / "reports" / "rhat.csv", outcome.rhat_report);
  std::ofstream(run_dir / "manifest.json") << fit_manifest(s, g, run_dir).dump(2)
                                           << "\n";

  std::cout << "fit: model " << s.model << ", L = " << s.L << ", "
            << outcome.draws.total_draws() << " draws -> " << run_dir.string() << "\n";
  if (outcome.has_rhat)
    std::cout << "max split-Rhat = " << outcome.rhat_report.max_rhat
              << ", divergence fraction = " << outcome.draws.divergence_fraction()
              << "\n";
  if (outcome.convergence_warning) {
    std::cerr << "warning: fit flagged unreliable (Rhat > 1.05 or divergences > 10%)\n";
    return kExitConvergence;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& out_dir, const std::string& group_id, int R,
                 int S, int T, int L, uint64_t seed, double nu, double corr,
                 double coef_scale, double subject_spread, int burn_in) {
  const int q = L * R;
  GeneratorSpec spec;
  spec.R = R;
  spec.S = S;
  spec.T = T;
  spec.L = L;
  spec.seed = seed;
  spec.nu = nu > 0 ? nu : R + 4;
  spec.burn_in = burn_in;
  spec.Sigma = MatrixXd::Constant(R, R, corr);
  spec.Sigma.diagonal().setOnes();
  cholesky(spec.Sigma, "simulate Sigma");  // reject an invalid correlation early
  spec.ps_diag.assign(S, VectorXd::Constant(q, 1.0 / subject_spread));

  // deterministic stable group coefficients from the seed
  Rng rng = Rng::stream(seed, 0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    spec.B = coef_scale * standard_normal_matrix(rng, q, R);
    for (int l = 2; l <= L; ++l)
      spec.B.block((l - 1) * R, 0, R, R) /= static_cast<double>(l * l);
    if (spectral_radius(companion_matrix(spec.B, L, R)) < 0.9) break;
    if (attempt == 999)
      throw Error(Errc::validation, "could not draw stable group coefficients");
  }

  SimulatedGroup sim = generate(spec);
  sim.dataset.group_id =
      group_id.empty() ? fs::path(out_dir).filename().string() : group_id;
  io::write_group(out_dir, sim.dataset);
  io::write_ground_truth(fs::path(out_dir) / "ground_truth.json", sim.truth);
  std::cout << "simulate: wrote " << S << " subjects (T=" << T << ", R=" << R
            << ") to " << out_dir << "\n";
  return kExitOk;
}

int cmd_tune(const std::string& data_path, int L, const std::string& out_path,
             bool no_center, const TuneConfig& cfg) {
  GroupDataset dataset = io::read_group_manifest(data_path);
  if (!no_center) dataset = mean_center(dataset);
  TuneResult result = tune(dataset, L, cfg);
  io::write_tune_result(out_path, result);
  std::cout << "tune: lambda = " << result.lambda
            << ", best log marginal = " << result.best_log_marginal << " ("
            << result.evaluations << " evaluations, "
            << (result.converged ? "converged" : "max_iter") << ") -> " << out_path
            << "\n";
  return kExitOk;
}

// One entry per fitted run; several runs of the same group roll up into the
// lag-by-model comparison table.
int cmd_waic(const std::string& data_path, const std::vector<std::string>& fit_dirs,
             const std::string& out_path, std::string md_path) {
  GroupDataset raw = io::read_group_manifest(data_path);

  json out;
  out["group_id"] = raw.group_id;
  out["fits"] = json::array();
  int max_lag = 0;
  std::map<std::pair<int, int>, double> by_lag_model;

  for (const auto& fit_dir : fit_dirs) {
    verify_run_artifacts(fit_dir);
    json m;
    std::ifstream(fs::path(fit_dir) / "manifest.json") >> m;
    PosteriorDraws draws = io::read_draws(fs::path(fit_dir) / "draws");

    GroupDataset dataset = m.value("centered", true) ? mean_center(raw) : raw;
    LagDesign design = build_group_design(dataset, draws.L);
    auto kappa_vec = m["kappa"].get<std::vector<double>>();
    VectorXd kappa = Eigen::Map<VectorXd>(kappa_vec.data(),
                                          static_cast<int>(kappa_vec.size()));
    ShrinkagePrior prior =
        build_default_prior(dataset, draws.L, m["lambda"].get<double>(), kappa);
    auto stats = subject_stats_all(design, prior);
    WaicReport report = waic(pointwise_loglik(draws, stats, design.n));

    out["fits"].push_back({{"fit", fit_dir},
                           {"model", draws.model},
                           {"L", draws.L},
                           {"waic", report.waic},
                           {"lppd", report.lppd},
                           {"p_waic", report.p_waic},
                           {"pointwise_unit", "subject"},
                           {"pointwise", report.pointwise}});
    by_lag_model[{draws.L, draws.model}] = report.waic;
    max_lag = std::max(max_lag, draws.L);
    std::cout << "waic: model " << draws.model << " L=" << draws.L << ": "
              << report.waic << " (lppd " << report.lppd << ", p_waic "
              << report.p_waic << ")\n";
  }

  std::vector<std::vector<std::vector<double>>> table(1);
  for (int l = 1; l <= max_lag; ++l) {
    std::vector<double> row(3, std::numeric_limits<double>::quiet_NaN());
    for (int model = 1; model <= 3; ++model) {
      auto it = by_lag_model.find({l, model});
      if (it != by_lag_model.end()) row[model - 1] = it->second;
    }
    table[0].push_back(std::move(row));
  }
  std::string md = io::waic_markdown_table({raw.group_id}, table);
  out["markdown"] = md;
  if (fs::path(out_path).has_parent_path())
    fs::create_directories(fs::path(out_path).parent_path());
  std::ofstream(out_path) << out.dump(2) << "\n";
  if (md_path.empty())
    md_path = fs::path(out_path).replace_extension(".md").string();
  std::ofstream(md_path) << md;
  std::cout << "waic report -> " << out_path << " (table: " << md_path << ")\n";
  return kExitOk;
}

struct RuleFlags {
  std::string lag1_rule = "sign";
  double ci_level = 0.95;
  double ec_floor = 0.0;
  double fc_floor = 0.35;
};

std::vector<ThresholdRule> ec_rules_from_flags(const RuleFlags& f, int L) {
  auto rules = default_ec_rules(L);
  for (auto& r : rules) {
    r.ci_level = f.ci_level;
    r.magnitude_floor = f.ec_floor;
  }
  if (L >= 1 && f.lag1_rule == "ci") rules[0].kind = ThresholdKind::ci_excludes_zero;
  return rules;
}

json rules_json(const std::vector<ThresholdRule>& ec_rules, const ThresholdRule* fc) {
  json j;
  j["ec_rules"] = json::array();
  for (size_t l = 0; l < ec_rules.size(); ++l)
    j["ec_rules"].push_back(
        {{"lag", l + 1},
         {"kind", ec_rules[l].kind == ThresholdKind::all_draws_same_sign
                      ? "all_draws_same_sign"
                      : "ci_excludes_zero"},
         {"ci_level", ec_rules[l].ci_level},
         {"magnitude_floor", ec_rules[l].magnitude_floor}});
  if (fc)
    j["fc_rule"] = {{"kind", fc->kind == ThresholdKind::all_draws_same_sign
                                 ? "all_draws_same_sign"
                                 : "ci_excludes_zero"},
                    {"ci_level", fc->ci_level},
                    {"magnitude_floor", fc->magnitude_floor}};
  return j;
}

int cmd_connectivity(const std::string& fit_dir, const std::string& out_dir,
                     const RuleFlags& flags) {
  verify_run_artifacts(fit_dir);
  PosteriorDraws draws = io::read_draws(fs::path(fit_dir) / "draws");
  auto labels = draws.region_labels;

  auto ec_rules = ec_rules_from_flags(flags, draws.L);
  auto ec = ec_extract(draws, ec_rules);
  ThresholdRule fc_rule = default_fc_rule();
  fc_rule.magnitude_floor = flags.fc_floor;

  fs::create_directories(out_dir);
  std::ofstream edges(fs::path(out_dir) / "edges.csv");
  edges << "from,to,lag,mean,sd,ci_low,ci_high,sign\n";
  for (const auto& e : ec)
    edges << labels[e.from_region] << "," << labels[e.to_region] << "," << e.lag
          << "," << io::format_double(e.mean) << "," << io::format_double(e.sd) << ","
          << io::format_double(e.ci_low) << "," << io::format_double(e.ci_high) << ","
          << (e.positive ? "positive" : "negative") << "\n";

  VectorXd fc_weights = VectorXd::Zero(draws.R);
  bool has_fc = draws.model != 3;
  std::vector<FcEdge> fc;
  if (has_fc) {
    fc = fc_extract(draws, fc_rule);
    for (const auto& e : fc)
      edges << labels[e.region_a] << "," << labels[e.region_b] << ",0,"
            << io::format_double(e.mean) << "," << io::format_double(e.sd) << ","
            << io::format_double(e.ci_low) << "," << io::format_double(e.ci_high)
            << "," << (e.positive ? "positive" : "negative") << "\n";
    fc_weights = fc_region_weights(fc, draws.R);
  }
  edges.close();

  VectorXd ec_weights = ec_region_weights(ec, draws.R);
  std::ofstream weights(fs::path(out_dir) / "region_weights.csv");
  weights << "region,ec_weight,fc_weight\n";
  for (int r = 0; r < draws.R; ++r)
    weights << labels[r] << "," << io::format_double(ec_weights(r)) << ","
            << io::format_double(fc_weights(r)) << "\n";

  json rj = rules_json(ec_rules, has_fc ? &fc_rule : nullptr);
  if (!has_fc) rj["fc_skipped"] = "Model 3 has a diagonal covariance matrix";
  std::ofstream(fs::path(out_dir) / "rules.json") << rj.dump(2) << "\n";

  std::cout << "connectivity: " << ec.size() << " EC edges, " << fc.size()
            << " FC edges -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_diff(const std::string& fit_a, const std::string& fit_b,
             const std::string& out_dir, const RuleFlags& flags,
             bool scatter = false) {
  verify_run_artifacts(fit_a);
  verify_run_artifacts(fit_b);
  PosteriorDraws a = io::read_draws(fs::path(fit_a) / "draws");
  PosteriorDraws b = io::read_draws(fs::path(fit_b) / "draws");
  auto labels = a.region_labels;

  std::vector<ThresholdRule> ec_rules(a.L, default_ec_diff_rule());
  for (auto& r : ec_rules) r.ci_level = flags.ci_level;
  ThresholdRule fc_rule = default_fc_diff_rule();
  fc_rule.ci_level = flags.ci_level;

  auto ec = group_diff_ec(a, b, ec_rules);
  fs::create_directories(out_dir);
  std::ofstream edges(fs::path(out_dir) / "edges.csv");
  edges << "from,to,lag,mean,sd,ci_low,ci_high,sign\n";
  for (const auto& e : ec)
    edges << labels[e.from_region] << "," << labels[e.to_region] << "," << e.lag
          << "," << io::format_double(e.mean) << "," << io::format_double(e.sd) << ","
          << io::format_double(e.ci_low) << "," << io::format_double(e.ci_high) << ","
          << (e.positive ? "positive" : "negative") << "\n";

  bool has_fc = a.model != 3 && b.model != 3;
  std::vector<FcEdge> fc;
  VectorXd fc_weights = VectorXd::Zero(a.R);
  if (has_fc) {
    fc = group_diff_fc(a, b, fc_rule);
    for (const auto& e : fc)
      edges << labels[e.region_a] << "," << labels[e.region_b] << ",0,"
            << io::format_double(e.mean) << "," << io::format_double(e.sd) << ","
            << io::format_double(e.ci_low) << "," << io::format_double(e.ci_high)
            << "," << (e.positive ? "positive" : "negative") << "\n";
    fc_weights = fc_region_weights(fc, a.R);
  }
  edges.close();

  VectorXd ec_weights = ec_region_weights(ec, a.R);
  std::ofstream weights(fs::path(out_dir) / "region_weights.csv");
  weights << "region,ec_weight,fc_weight\n";
  for (int r = 0; r < a.R; ++r)
    weights << labels[r] << "," << io::format_double(ec_weights(r)) << ","
            << io::format_double(fc_weights(r)) << "\n";
  std::ofstream(fs::path(out_dir) / "rules.json")
      << rules_json(ec_rules, has_fc ? &fc_rule : nullptr).dump(2) << "\n";

  if (scatter)
    io::write_scatter_csv(fs::path(out_dir) / "scatter.csv", summarize_scatter(a, b));

  std::cout << "diff: " << ec.size() << " EC difference edges, " << fc.size()
            << " FC difference edges -> " << out_dir << "\n";
  return kExitOk;
}

// aborts with a stage-tagged error; artifacts of completed stages stay on disk
template <typename F>
auto pipeline_stage(const std::string& name, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "pipeline stage '" + name + "' failed: " + e.what());
  }
}

int cmd_pipeline(const std::string& data_a, const std::string& data_b,
                 const std::string& out_dir, uint64_t seed, int max_lag,
                 int chains, int warmup, int draws, int exact_draws,
                 bool no_center, int jobs, const RuleFlags& rule_flags) {
  fs::path run_dir = make_run_dir(out_dir, "", "pipeline-" + std::to_string(seed));
  std::vector<std::string> data_paths = {data_a};
  if (!data_b.empty()) data_paths.push_back(data_b);

  std::vector<std::string> group_names;
  std::vector<std::vector<std::vector<double>>> table;  // [group][lag][model]
  std::vector<std::vector<std::vector<fs::path>>> all_fit_dirs;  // [group][lag][model]
  int exit_code = kExitOk;

  for (size_t gi = 0; gi < data_paths.size(); ++gi) {
    GroupDataset raw = io::read_group_manifest(data_paths[gi]);
    std::string gname = raw.group_id;
    if (std::find(group_names.begin(), group_names.end(), gname) != group_names.end())
      gname += "_" + std::to_string(gi + 1);
    group_names.push_back(gname);
    std::vector<std::vector<double>> lag_model;
    std::vector<std::vector<fs::path>> runs_by_lag;

    for (int L = 1; L <= max_lag; ++L) {
      GroupDataset dataset = no_center ? raw : mean_center(raw);
      std::string stage = gname + "/L" + std::to_string(L);
      TuneResult tuned =
          pipeline_stage("tune " + stage, [&] { return tune(dataset, L); });
      io::write_tune_result(
          run_dir / ("groups/" + gname + "/L" + std::to_string(L) + "/tune.json"),
          tuned);

      LagDesign design = build_group_design(dataset, L);
      ShrinkagePrior prior = build_default_prior(dataset, L, tuned.lambda, tuned.kappa);
      auto stats = subject_stats_all(design, prior);

      LoadedGroup g{dataset, design, prior, tuned.lambda, tuned.kappa};
      std::vector<FitSettings> settings(3);
      std::vector<FitOutcome> outcomes(3);
      for (int model = 1; model <= 3; ++model) {
        FitSettings s;
        s.data_path = data_paths[gi];
        s.model = model;
        s.L = L;
        s.seed = seed + 7919 * gi + 101 * L + model;
        s.chains = chains;
        s.warmup = warmup;
        s.draws = draws;
        s.exact_draws = exact_draws;
        s.no_center = no_center;
        settings[model - 1] = std::move(s);
      }
      // the three model fits of one lag are independent; --jobs > 1 runs them
      // concurrently with their internal parallelism turned off
      pipeline_stage("fit " + stage, [&] {
        parallel_for(jobs > 1 ? Exec::par : Exec::seq, 3, [&](int m) {
          outcomes[m] = run_fit(g, settings[m], jobs > 1 ? Exec::seq : Exec::par);
        });
        return 0;
      });

      std::vector<double> row;
      std::vector<fs::path> run_paths;
      for (int model = 1; model <= 3; ++model) {
        FitOutcome& fit = outcomes[model - 1];
        if (fit.convergence_warning) exit_code = kExitConvergence;

        fs::path fit_dir = run_dir / ("groups/" + gname + "/L" +
                                      std::to_string(L) + "/model" +
                                      std::to_string(model));
        io::write_draws(fit_dir / "draws", fit.draws);
        if (fit.has_rhat)
          io::write_rhat_csv(fit_dir / "reports" / "rhat.csv", fit.rhat_report);
        json m = fit_manifest(settings[model - 1], g, fit_dir);
        m["command"] = "pipeline";
        std::ofstream(fit_dir / "manifest.json") << m.dump(2) << "\n";

        WaicReport rep = pipeline_stage("waic " + stage, [&] {
          return waic(pointwise_loglik(fit.draws, stats, design.n));
        });
        io::write_waic_report(fit_dir / "waic.json", rep);
        row.push_back(rep.waic);
        run_paths.push_back(fit_dir);
      }
      lag_model.push_back(std::move(row));
      runs_by_lag.push_back(std::move(run_paths));
    }
    all_fit_dirs.push_back(std::move(runs_by_lag));
    table.push_back(std::move(lag_model));
  }

  // optimal lag for the hierarchical model, shared across groups so that the
  // group comparison stays at a single lag order
  std::vector<int> best_lag_per_group;
  int shared_best = 0;
  {
    std::vector<double> summed(max_lag, 0.0);
    for (size_t g = 0; g < group_names.size(); ++g) {
      int best = 0;
      for (int l = 0; l < max_lag; ++l) {
        summed[l] += table[g][l][0];
        if (table[g][l][0] < table[g][best][0]) best = l;
      }
      best_lag_per_group.push_back(best + 1);
    }
    for (int l = 1; l < max_lag; ++l)
      if (summed[l] < summed[shared_best]) shared_best = l;
  }

  fs::create_directories(run_dir / "reports");
  std::string md = io::waic_markdown_table(group_names, table);
  std::ofstream(run_dir / "reports" / "waic.md") << md;
  {
    json wj;
    for (size_t g = 0; g < group_names.size(); ++g) {
      wj[group_names[g]] = {{"best_L_model1", best_lag_per_group[g]},
                            {"waic_by_lag_model", table[g]}};
    }
    wj["connectivity_L"] = shared_best + 1;
    std::ofstream(run_dir / "reports" / "waic.json") << wj.dump(2) << "\n";
  }

  for (size_t g = 0; g < group_names.size(); ++g)
    for (int model = 1; model <= 3; ++model)
      pipeline_stage("connectivity " + group_names[g], [&] {
        return cmd_connectivity(all_fit_dirs[g][shared_best][model - 1].string(),
                                (run_dir / ("connectivity/" + group_names[g] +
                                            "/model" + std::to_string(model)))
                                    .string(),
                                rule_flags);
      });

  if (data_paths.size() == 2)
    for (int model = 1; model <= 3; ++model)
      pipeline_stage("diff model" + std::to_string(model), [&] {
        return cmd_diff(all_fit_dirs[0][shared_best][model - 1].string(),
                        all_fit_dirs[1][shared_best][model - 1].string(),
                        (run_dir / ("diff/model" + std::to_string(model))).string(),
                        rule_flags);
      });

  std::cout << "pipeline: report in " << (run_dir / "reports").string() << "\n";
  std::cout << md;
  return exit_code;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Hierarchical Bayesian VAR for effective and functional brain connectivity"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file; command-line flags take precedence");

  // validate
  auto* validate = app.add_subcommand("validate", "Validate a group manifest");
  std::string v_data;
  bool v_no_center = false;
  validate->add_option("--data", v_data, "group manifest JSON")->required();
  validate->add_flag("--no-center", v_no_center, "skip per-region mean-centering");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic data from the hierarchy");
  std::string sim_out = "sim", sim_group;
  int sim_R = 3, sim_S = 5, sim_T = 100, sim_L = 1, sim_burn = 200;
  uint64_t sim_seed = 1;
  double sim_nu = 0, sim_corr = 0.4, sim_coef = 0.25, sim_spread = 0.05;
  simulate->add_option("--out", sim_out, "output directory");
  simulate->add_option("--group-id", sim_group,
                       "group identifier (default: output directory name)");
  simulate->add_option("--regions", sim_R, "number of regions R");
  simulate->add_option("--subjects", sim_S, "number of subjects S");
  simulate->add_option("--timepoints", sim_T, "time series length T");
  simulate->add_option("--lags", sim_L, "lag order L");
  simulate->add_option("--seed", sim_seed, "generator seed")->required();
  simulate->add_option("--nu", sim_nu, "subject covariance dof (default R+4)");
  simulate->add_option("--corr", sim_corr, "group-level correlation");
  simulate->add_option("--coef-scale", sim_coef, "group coefficient scale");
  simulate->add_option("--subject-spread", sim_spread,
                       "subject coefficient variance around the group mean");
  simulate->add_option("--burn-in", sim_burn, "simulation burn-in steps");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "Empirical-Bayes hyperparameter tuning");
  std::string t_data, t_out = "tune.json";
  int t_L = 2;
  bool t_no_center = false, t_two_stage = false;
  TuneConfig t_cfg;
  tune_cmd->add_option("--data", t_data, "group manifest JSON")->required();
  tune_cmd->add_option("--lags", t_L, "lag order L");
  tune_cmd->add_option("--out", t_out, "output JSON path");
  tune_cmd->add_option("--start-lambda", t_cfg.start_lambda, "start value");
  tune_cmd->add_option("--start-kappa", t_cfg.start_kappa, "start value");
  tune_cmd->add_option("--tol", t_cfg.rel_tolerance, "relative tolerance");
  tune_cmd->add_option("--max-iter", t_cfg.max_iter, "iteration cap");
  tune_cmd->add_flag("--two-stage", t_two_stage, "shared kappa first, then refine");
  tune_cmd->add_flag("--no-center", t_no_center, "skip mean-centering");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit one model and persist draws");
  FitSettings fs_;
  fit->add_option("--data", fs_.data_path, "group manifest JSON")->required();
  fit->add_option("--model", fs_.model, "1 (hierarchical), 2 (common Sigma), 3 (diagonal)")
      ->check(CLI::Range(1, 3));
  fit->add_option("--lags", fs_.L, "lag order L");
  auto* fit_seed = fit->add_option("--seed", fs_.seed, "sampling seed (mandatory, here or in --config)");
  fit->add_option("--out", fs_.out_dir, "output directory");
  fit->add_option("--run-name", fs_.run_name, "run directory name (default timestamp-hash)");
  fit->add_option("--hyper", fs_.hyper_path, "tuned hyperparameter JSON (from tune)");
  fit->add_option("--lambda", fs_.lambda, "explicit lambda (when no --hyper)");
  fit->add_option("--kappa", fs_.kappa, "explicit kappa for every subject");
  fit->add_option("--chains", fs_.chains, "MCMC chains (model 1)");
  fit->add_option("--warmup", fs_.warmup, "warmup iterations per chain");
  fit->add_option("--draws", fs_.draws, "sampling iterations per chain");
  fit->add_option("--exact-draws", fs_.exact_draws, "draw count for models 2/3");
  fit->add_option("--fix-nu", fs_.fix_nu, "clamp nu at this value (model 1)");
  fit->add_flag("--no-center", fs_.no_center, "skip mean-centering");
  fit->add_option("--dof-convention", fs_.dof_convention, "corrected | paper")
      ->check(CLI::IsMember({"corrected", "paper"}));
  fit->add_option("--model3-mode", fs_.model3_mode, "region | paper")
      ->check(CLI::IsMember({"region", "paper"}));

  // waic
  auto* waic_cmd = app.add_subcommand("waic", "WAIC for persisted fits");
  std::string w_data, w_out = "waic.json", w_md;
  std::vector<std::string> w_fits;
  waic_cmd->add_option("--data", w_data, "group manifest JSON")->required();
  waic_cmd->add_option("--fit", w_fits, "run directory from fit (repeatable)")
      ->required();
  waic_cmd->add_option("--out", w_out, "output JSON path");
  waic_cmd->add_option("--md", w_md, "Markdown table path (default: next to --out)");

  // connectivity
  auto* conn = app.add_subcommand("connectivity", "Thresholded EC/FC edge lists");
  std::string c_fit, c_out = "connectivity";
  RuleFlags c_flags;
  conn->add_option("--fit", c_fit, "run directory from fit")->required();
  conn->add_option("--out", c_out, "output directory");
  conn->add_option("--lag1-rule", c_flags.lag1_rule, "sign | ci")
      ->check(CLI::IsMember({"sign", "ci"}));
  conn->add_option("--ci", c_flags.ci_level, "credible level");
  conn->add_option("--ec-floor", c_flags.ec_floor, "EC |mean| floor");
  conn->add_option("--fc-floor", c_flags.fc_floor, "FC |mean correlation| floor");

  // diff
  auto* diff = app.add_subcommand("diff", "Differences between two fits (groups or models)");
  std::string d_a, d_b, d_out = "diff";
  bool d_scatter = false;
  RuleFlags d_flags;
  diff->add_option("--fit-a", d_a, "run directory, side A")->required();
  diff->add_option("--fit-b", d_b, "run directory, side B")->required();
  diff->add_option("--out", d_out, "output directory");
  diff->add_option("--ci", d_flags.ci_level, "credible level");
  diff->add_flag("--scatter", d_scatter,
                 "also write scatter.csv comparing posterior means/SDs/t-ratios");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "tune -> fit (all lags x models) -> waic -> connectivity");
  std::string p_data, p_data_b, p_out = "out";
  uint64_t p_seed = 1;
  int p_lags = 3, p_chains = 3, p_warmup = 200, p_draws = 500, p_exact = 1500;
  int p_jobs = 1;
  bool p_no_center = false;
  RuleFlags p_flags;
  pipe->add_option("--data", p_data, "group manifest JSON")->required();
  pipe->add_option("--data-b", p_data_b, "second group manifest (enables diff)");
  pipe->add_option("--out", p_out, "output directory");
  auto* pipe_seed = pipe->add_option("--seed", p_seed, "base seed (mandatory, here or in --config)");
  pipe->add_option("--max-lag", p_lags, "largest lag order to compare");
  pipe->add_option("--chains", p_chains, "MCMC chains (model 1)");
  pipe->add_option("--warmup", p_warmup, "warmup iterations");
  pipe->add_option("--draws", p_draws, "sampling iterations");
  pipe->add_option("--exact-draws", p_exact, "draw count for models 2/3");
  pipe->add_option("--jobs", p_jobs, "model fits of one lag to run concurrently");
  pipe->add_flag("--no-center", p_no_center, "skip mean-centering");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    json cfg = load_config(config_path);

    if (*validate) {
      GroupDataset d = io::read_group_manifest(v_data);
      if (!v_no_center) d = mean_center(d);
      std::cout << "group '" << d.group_id << "': S=" << d.S() << ", T=" << d.T()
                << ", R=" << d.R() << "\nregions:";
      for (const auto& l : d.region_labels()) std::cout << " " << l;
      std::cout << "\nvalid\n";
      return kExitOk;
    }
    if (*simulate) {
      apply_config(*simulate, cfg, "seed", sim_seed);
      return cmd_simulate(sim_out, sim_group, sim_R, sim_S, sim_T, sim_L, sim_seed,
                          sim_nu, sim_corr, sim_coef, sim_spread, sim_burn);
    }
    if (*tune_cmd) {
      t_cfg.two_stage = t_two_stage;
      return cmd_tune(t_data, t_L, t_out, t_no_center, t_cfg);
    }
    if (*fit) {
      if (fit_seed->count() == 0 && !cfg.contains("seed"))
        throw Error(Errc::validation, "a seed is mandatory: pass --seed or set it in --config");
      apply_config(*fit, cfg, "model", fs_.model);
      apply_config(*fit, cfg, "lags", fs_.L);
      apply_config(*fit, cfg, "seed", fs_.seed);
      apply_config(*fit, cfg, "chains", fs_.chains);
      apply_config(*fit, cfg, "warmup", fs_.warmup);
      apply_config(*fit, cfg, "draws", fs_.draws);
      apply_config(*fit, cfg, "exact-draws", fs_.exact_draws);
      apply_config(*fit, cfg, "lambda", fs_.lambda);
      apply_config(*fit, cfg, "kappa", fs_.kappa);
      apply_config(*fit, cfg, "hyper", fs_.hyper_path);
      apply_config(*fit, cfg, "run-name", fs_.run_name);
      apply_config(*fit, cfg, "out", fs_.out_dir);
      return cmd_fit(fs_);
    }
    if (*waic_cmd) return cmd_waic(w_data, w_fits, w_out, w_md);
    if (*conn) return cmd_connectivity(c_fit, c_out, c_flags);
    if (*diff) return cmd_diff(d_a, d_b, d_out, d_flags, d_scatter);
    if (*pipe) {
      if (pipe_seed->count() == 0 && !cfg.contains("seed"))
        throw Error(Errc::validation, "a seed is mandatory: pass --seed or set it in --config");
      apply_config(*pipe, cfg, "seed", p_seed);
      apply_config(*pipe, cfg, "max-lag", p_lags);
      apply_config(*pipe, cfg, "chains", p_chains);
      apply_config(*pipe, cfg, "warmup", p_warmup);
      apply_config(*pipe, cfg, "draws", p_draws);
      apply_config(*pipe, cfg, "exact-draws", p_exact);
      apply_config(*pipe, cfg, "out", p_out);
      apply_config(*pipe, cfg, "jobs", p_jobs);
      return cmd_pipeline(p_data, p_data_b, p_out, p_seed, p_lags, p_chains,
                          p_warmup, p_draws, p_exact, p_no_center, p_jobs, p_flags);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return kExitOk;
}

}  // namespace hbvar::cli
