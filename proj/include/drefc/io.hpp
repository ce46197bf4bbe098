// JSON and CSV persistence for models, mixtures, trajectories and solver
// results. All matrices are stored row-major.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "drefc/control.hpp"
#include "drefc/dro.hpp"
#include "drefc/gmm.hpp"
#include "drefc/koopman.hpp"
#include "drefc/sfr.hpp"

namespace drefc::io {

using json = nlohmann::json;

json to_json(const SfrParams& p);
SfrParams sfr_params_from_json(const json& j);

json to_json(const Gmm& g);
Gmm gmm_from_json(const json& j);

json to_json(const JointGmm& g);
JointGmm joint_gmm_from_json(const json& j);

json to_json(const KoopmanModel& m);
KoopmanModel koopman_model_from_json(const json& j);

json to_json(const Coupling& c);
json to_json(const WorstCaseResult& r);

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& t);
Trajectory read_trajectory_csv(const std::filesystem::path& file);

// One CSV per trajectory plus a manifest with parameters and seeds.
void write_dataset(const std::filesystem::path& dir, const SfrParams& params,
                   const std::vector<Trajectory>& trajectories,
                   const std::vector<double>& deficits, std::uint64_t seed);
std::vector<Trajectory> read_dataset(const std::filesystem::path& dir);

void write_json_file(const std::filesystem::path& file, const json& j);
json read_json_file(const std::filesystem::path& file);

// Column-oriented scalar samples (one value per line, `#` comments allowed).
std::vector<double> read_samples_csv(const std::filesystem::path& file);
void write_samples_csv(const std::filesystem::path& file,
                       const std::vector<double>& samples,
                       const std::string& header = "value");

// FNV-1a hash of the canonical (sorted-key) JSON dump, hex-encoded.
std::string config_hash(const json& j);

}  // namespace drefc::io
