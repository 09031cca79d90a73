#include "hbvar/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hbvar/distributions.hpp"

namespace hbvar::io {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' '))
      field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  return fields;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  return out;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(j[0].size());
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int jj = 0; jj < cols; ++jj) m(i, jj) = j[i][jj].get<double>();
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SubjectPanel read_subject_csv(const fs::path& path) {
  auto in = open_in(path);
  SubjectPanel panel;
  panel.subject_id = path.stem().string();
  std::string line;
  if (!std::getline(in, line))
    throw Error(Errc::io, "empty subject file " + path.string());
  panel.region_labels = split_csv_line(line);
  const int R = static_cast<int>(panel.region_labels.size());

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != R)
      throw Error(Errc::validation,
                  path.string() + ": row has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(R));
    std::vector<double> row(R);
    for (int r = 0; r < R; ++r) {
      try {
        row[r] = std::stod(fields[r]);
      } catch (const std::exception&) {
        throw Error(Errc::validation,
                    path.string() + ": cannot parse '" + fields[r] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  panel.values.resize(static_cast<int>(rows.size()), R);
  for (size_t t = 0; t < rows.size(); ++t)
    for (int r = 0; r < R; ++r) panel.values(static_cast<int>(t), r) = rows[t][r];
  validate_panel(panel);
  return panel;
}

void write_subject_csv(const fs::path& path, const SubjectPanel& panel) {
  auto out = open_out(path);
  for (int r = 0; r < panel.R(); ++r)
    out << panel.region_labels[r] << (r + 1 == panel.R() ? "\n" : ",");
  for (int t = 0; t < panel.T(); ++t)
    for (int r = 0; r < panel.R(); ++r)
      out << format_double(panel.values(t, r)) << (r + 1 == panel.R() ? "\n" : ",");
}

GroupDataset read_group_manifest(const fs::path& path) {
  auto in = open_in(path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(Errc::io, "cannot parse manifest " + path.string() + ": " + e.what());
  }
  GroupDataset dataset;
  dataset.group_id = j.value("group_id", "group");
  if (!j.contains("subjects") || !j["subjects"].is_array())
    throw Error(Errc::validation, "manifest missing 'subjects' array");
  for (const auto& entry : j["subjects"]) {
    fs::path sub = entry.get<std::string>();
    if (sub.is_relative()) sub = path.parent_path() / sub;
    dataset.subjects.push_back(read_subject_csv(sub));
  }
  validate_dataset(dataset);
  return dataset;
}

void write_group(const fs::path& dir, const GroupDataset& dataset, double tr_seconds) {
  fs::create_directories(dir);
  json manifest;
  manifest["group_id"] = dataset.group_id;
  manifest["subjects"] = json::array();
  for (const auto& panel : dataset.subjects) {
    std::string name = panel.subject_id + ".csv";
    write_subject_csv(dir / name, panel);
    manifest["subjects"].push_back(name);
  }
  if (tr_seconds > 0) manifest["tr_seconds"] = tr_seconds;
  open_out(dir / "manifest.json") << manifest.dump(2) << "\n";
}

void write_draws(const fs::path& dir, const PosteriorDraws& draws) {
  fs::create_directories(dir);
  auto out = open_out(dir / "draws.csv");
  auto names = draws.scalar_names();
  for (size_t i = 0; i < names.size(); ++i)
    out << names[i] << (i + 1 == names.size() ? "\n" : ",");
  for (int c = 0; c < draws.n_chains(); ++c)
    for (int d = 0; d < draws.draws_per_chain(); ++d)
      for (int p = 0; p < draws.n_scalars(); ++p)
        out << format_double(draws.scalar_value(c, d, p))
            << (p + 1 == draws.n_scalars() ? "\n" : ",");

  json side;
  side["model"] = draws.model;
  side["q"] = draws.q;
  side["R"] = draws.R;
  side["L"] = draws.L;
  side["S"] = draws.S;
  side["n"] = draws.n;
  side["has_nu"] = draws.has_nu;
  side["region_labels"] = draws.region_labels;
  side["seed"] = draws.seed;
  side["warmup"] = draws.warmup;
  side["n_chains"] = draws.n_chains();
  side["draws_per_chain"] = draws.draws_per_chain();
  side["conventions"] = json{
      {"inverse_wishart_density", iw_convention_string()},
      {"dof", to_string(draws.dof_convention)},
  };
  json chain_diag = json::array();
  for (const auto& c : draws.chains) {
    chain_diag.push_back({{"divergences", c.diag.divergences},
                          {"post_warmup", c.diag.post_warmup},
                          {"step_size", c.diag.step_size},
                          {"mean_accept", c.diag.mean_accept},
                          {"mean_tree_depth", c.diag.mean_tree_depth},
                          {"max_tree_depth_hits", c.diag.max_tree_depth_hits}});
  }
  side["chains"] = std::move(chain_diag);
  open_out(dir / "draws.json") << side.dump(2) << "\n";
}

PosteriorDraws read_draws(const fs::path& dir) {
  json side;
  open_in(dir / "draws.json") >> side;
  PosteriorDraws draws;
  draws.model = side["model"];
  draws.q = side["q"];
  draws.R = side["R"];
  draws.L = side["L"];
  draws.S = side["S"];
  draws.n = side["n"];
  draws.has_nu = side["has_nu"];
  draws.region_labels = side["region_labels"].get<std::vector<std::string>>();
  draws.seed = side["seed"];
  draws.warmup = side["warmup"];
  draws.dof_convention = side["conventions"]["dof"] == "paper"
                             ? DofConvention::paper
                             : DofConvention::corrected;
  const int n_chains = side["n_chains"];
  const int per_chain = side["draws_per_chain"];
  draws.chains.resize(n_chains);
  for (int c = 0; c < n_chains; ++c) {
    const auto& d = side["chains"][c];
    draws.chains[c].diag.divergences = d["divergences"];
    draws.chains[c].diag.post_warmup = d["post_warmup"];
    draws.chains[c].diag.step_size = d["step_size"];
    draws.chains[c].diag.mean_accept = d["mean_accept"];
    draws.chains[c].diag.mean_tree_depth = d.value("mean_tree_depth", 0.0);
    draws.chains[c].diag.max_tree_depth_hits = d["max_tree_depth_hits"];
  }

  auto in = open_in(dir / "draws.csv");
  std::string line;
  std::getline(in, line);  // header
  for (int c = 0; c < n_chains; ++c) {
    auto& chain = draws.chains[c];
    for (int d = 0; d < per_chain; ++d) {
      if (!std::getline(in, line))
        throw Error(Errc::io, "draws.csv truncated");
      auto fields = split_csv_line(line);
      if (static_cast<int>(fields.size()) != draws.n_scalars())
        throw Error(Errc::io, "draws.csv column count mismatch");
      MatrixXd b(draws.q, draws.R);
      int k = 0;
      for (int i = 0; i < draws.q; ++i)
        for (int j = 0; j < draws.R; ++j) b(i, j) = std::stod(fields[k++]);
      MatrixXd sigma(draws.R, draws.R);
      for (int i = 0; i < draws.R; ++i)
        for (int j = 0; j <= i; ++j) {
          sigma(i, j) = std::stod(fields[k++]);
          sigma(j, i) = sigma(i, j);
        }
      chain.B.push_back(std::move(b));
      chain.Sigma.push_back(std::move(sigma));
      if (draws.has_nu) chain.nu.push_back(std::stod(fields[k]));
    }
  }
  return draws;
}

void write_tune_result(const fs::path& path, const TuneResult& result) {
  json j;
  j["lambda"] = result.lambda;
  j["kappa"] = std::vector<double>(result.kappa.data(),
                                   result.kappa.data() + result.kappa.size());
  j["best_log_marginal"] = result.best_log_marginal;
  j["converged"] = result.converged;
  j["termination"] = result.termination == TuneTermination::tolerance ? "tolerance"
                     : result.termination == TuneTermination::max_iter ? "max_iter"
                                                                       : "failure";
  j["evaluations"] = result.evaluations;
  json trace = json::array();
  for (const auto& [it, value] : result.trace) trace.push_back({{"iteration", it}, {"best", value}});
  j["trace"] = std::move(trace);
  open_out(path) << j.dump(2) << "\n";
}

TuneResult read_tune_result(const fs::path& path) {
  json j;
  open_in(path) >> j;
  TuneResult result;
  result.lambda = j["lambda"];
  auto kappa = j["kappa"].get<std::vector<double>>();
  result.kappa = Eigen::Map<VectorXd>(kappa.data(), static_cast<int>(kappa.size()));
  result.best_log_marginal = j["best_log_marginal"];
  result.converged = j["converged"];
  std::string term = j["termination"];
  result.termination = term == "tolerance" ? TuneTermination::tolerance
                       : term == "max_iter" ? TuneTermination::max_iter
                                            : TuneTermination::failure;
  result.evaluations = j.value("evaluations", 0);
  for (const auto& e : j["trace"])
    result.trace.emplace_back(e["iteration"].get<int>(), e["best"].get<double>());
  return result;
}

void write_ground_truth(const fs::path& path, const GroundTruth& truth) {
  json j;
  j["B"] = matrix_to_json(truth.B);
  j["Sigma"] = matrix_to_json(truth.Sigma);
  j["nu"] = truth.nu;
  j["subject_B"] = json::array();
  j["subject_Sigma"] = json::array();
  for (const auto& m : truth.subject_B) j["subject_B"].push_back(matrix_to_json(m));
  for (const auto& m : truth.subject_Sigma)
    j["subject_Sigma"].push_back(matrix_to_json(m));
  open_out(path) << j.dump(2) << "\n";
}

GroundTruth read_ground_truth(const fs::path& path) {
  json j;
  open_in(path) >> j;
  GroundTruth truth;
  truth.B = matrix_from_json(j["B"]);
  truth.Sigma = matrix_from_json(j["Sigma"]);
  truth.nu = j["nu"];
  for (const auto& m : j["subject_B"]) truth.subject_B.push_back(matrix_from_json(m));
  for (const auto& m : j["subject_Sigma"])
    truth.subject_Sigma.push_back(matrix_from_json(m));
  return truth;
}

void write_waic_report(const fs::path& path, const WaicReport& report) {
  json j;
  j["lppd"] = report.lppd;
  j["p_waic"] = report.p_waic;
  j["waic"] = report.waic;
  j["pointwise_unit"] = "subject";
  j["pointwise"] = report.pointwise;
  open_out(path) << j.dump(2) << "\n";
}

std::string waic_markdown_table(
    const std::vector<std::string>& group_names,
    const std::vector<std::vector<std::vector<double>>>& waic_by_group_lag_model) {
  std::ostringstream out;
  out << "|      |";
  for (const auto& g : group_names)
    for (int m = 1; m <= 3; ++m) out << " " << g << " Model " << m << " |";
  out << "\n|------|";
  for (size_t i = 0; i < group_names.size() * 3; ++i) out << "---|";
  out << "\n";
  for (size_t l = 0; l < waic_by_group_lag_model.front().size(); ++l) {
    out << "| L=" << (l + 1) << " |";
    for (size_t g = 0; g < group_names.size(); ++g) {
      // flag each group/model column's minimum over lags in bold
      for (size_t m = 0; m < 3; ++m) {
        double v = waic_by_group_lag_model[g][l][m];
        if (std::isnan(v)) {
          out << " - |";
          continue;
        }
        bool best = true;
        for (size_t l2 = 0; l2 < waic_by_group_lag_model[g].size(); ++l2) {
          double other = waic_by_group_lag_model[g][l2][m];
          if (!std::isnan(other) && other < v) best = false;
        }
        out << (best ? " **" : " ") << std::fixed;
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.1f", v);
        out << buf << (best ? "** |" : " |");
      }
    }
    out << "\n";
  }
  return out.str();
}

void write_edges_csv(const fs::path& path, const std::vector<EcEdge>& edges,
                     const std::vector<std::string>& labels) {
  auto out = open_out(path);
  out << "from,to,lag,mean,sd,ci_low,ci_high,sign\n";
  for (const auto& e : edges)
    out << labels[e.from_region] << "," << labels[e.to_region] << "," << e.lag << ","
        << format_double(e.mean) << "," << format_double(e.sd) << ","
        << format_double(e.ci_low) << "," << format_double(e.ci_high) << ","
        << (e.positive ? "positive" : "negative") << "\n";
}

void write_edges_csv(const fs::path& path, const std::vector<FcEdge>& edges,
                     const std::vector<std::string>& labels) {
  auto out = open_out(path);
  out << "from,to,lag,mean,sd,ci_low,ci_high,sign\n";
  for (const auto& e : edges)
    out << labels[e.region_a] << "," << labels[e.region_b] << ",0,"
        << format_double(e.mean) << "," << format_double(e.sd) << ","
        << format_double(e.ci_low) << "," << format_double(e.ci_high) << ","
        << (e.positive ? "positive" : "negative") << "\n";
}

void write_region_weights_csv(const fs::path& path, const VectorXd& weights,
                              const std::vector<std::string>& labels) {
  auto out = open_out(path);
  out << "region,weight\n";
  for (int r = 0; r < weights.size(); ++r)
    out << labels[r] << "," << format_double(weights(r)) << "\n";
}

void write_scatter_csv(const fs::path& path, const std::vector<ScatterRow>& rows) {
  auto out = open_out(path);
  out << "parameter,mean_a,mean_b,sd_a,sd_b,tratio_a,tratio_b\n";
  for (const auto& r : rows)
    out << r.parameter << "," << format_double(r.mean_a) << ","
        << format_double(r.mean_b) << "," << format_double(r.sd_a) << ","
        << format_double(r.sd_b) << "," << format_double(r.tratio_a) << ","
        << format_double(r.tratio_b) << "\n";
}

void write_rhat_csv(const fs::path& path, const RhatReport& report) {
  auto out = open_out(path);
  out << "parameter,rhat\n";
  for (const auto& [name, value] : report.values)
    out << name << "," << format_double(value) << "\n";
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot hash " + path.string());
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016" PRIx64, h);
  return hex;
}

}  // namespace hbvar::io
