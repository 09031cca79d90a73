#pragma once

#include <filesystem>

#include "hbvar/connectivity.hpp"
#include "hbvar/core_data.hpp"
#include "hbvar/diagnostics.hpp"
#include "hbvar/draws.hpp"
#include "hbvar/empirical_bayes.hpp"
#include "hbvar/model_eval.hpp"
#include "hbvar/simulate.hpp"

namespace hbvar::io {

namespace fs = std::filesystem;

// Subject file: first row holds the region labels, each following row one
// time point; the filename stem is the subject id.
SubjectPanel read_subject_csv(const fs::path& path);
void write_subject_csv(const fs::path& path, const SubjectPanel& panel);

// Group manifest: {"group_id": ..., "subjects": [relative or absolute paths],
// "tr_seconds": optional metadata}.
GroupDataset read_group_manifest(const fs::path& path);
void write_group(const fs::path& dir, const GroupDataset& dataset,
                 double tr_seconds = 0.0);

// Draw files: one row per draw (chain-major), columns = flattened B
// (row-major), lower-triangle Sigma, then nu when present; numbers printed
// with %.17g so rereads are exact. The JSON sidecar carries dimensions, seeds,
// model id, convention flags and sampler diagnostics.
void write_draws(const fs::path& dir, const PosteriorDraws& draws);
PosteriorDraws read_draws(const fs::path& dir);

void write_tune_result(const fs::path& path, const TuneResult& result);
TuneResult read_tune_result(const fs::path& path);

void write_ground_truth(const fs::path& path, const GroundTruth& truth);
GroundTruth read_ground_truth(const fs::path& path);

void write_waic_report(const fs::path& path, const WaicReport& report);

// rows L=1..max_L, columns model 1..3 per group; lowest entry flagged
std::string waic_markdown_table(
    const std::vector<std::string>& group_names,
    const std::vector<std::vector<std::vector<double>>>& waic_by_group_lag_model);

void write_edges_csv(const fs::path& path, const std::vector<EcEdge>& edges,
                     const std::vector<std::string>& labels);
void write_edges_csv(const fs::path& path, const std::vector<FcEdge>& edges,
                     const std::vector<std::string>& labels);
void write_region_weights_csv(const fs::path& path, const VectorXd& weights,
                              const std::vector<std::string>& labels);
void write_scatter_csv(const fs::path& path, const std::vector<ScatterRow>& rows);
void write_rhat_csv(const fs::path& path, const RhatReport& report);

// 64-bit FNV-1a over file bytes, hex-encoded; the run manifest records one
// per input and the pipeline refuses to reuse an artifact whose hash moved.
std::string file_hash(const fs::path& path);

std::string format_double(double v);  // %.17g

}  // namespace hbvar::io
