#include "drefc/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace drefc::io {

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

}  // namespace

json to_json(const SfrParams& p) {
  return {{"inertia_2h", p.inertia_2h},
          {"damping", p.damping},
          {"governor_gain", p.governor_gain},
          {"governor_time_const", p.governor_time_const},
          {"deadband", p.deadband},
          {"step_dt", p.step_dt},
          {"saturation", p.saturation},
          {"noise_std", p.noise_std}};
}

SfrParams sfr_params_from_json(const json& j) {
  SfrParams p;
  p.inertia_2h = j.value("inertia_2h", p.inertia_2h);
  p.damping = j.value("damping", p.damping);
  p.governor_gain = j.value("governor_gain", p.governor_gain);
  p.governor_time_const = j.value("governor_time_const", p.governor_time_const);
  p.deadband = j.value("deadband", p.deadband);
  p.step_dt = j.value("step_dt", p.step_dt);
  p.saturation = j.value("saturation", p.saturation);
  p.noise_std = j.value("noise_std", p.noise_std);
  p.validate();
  return p;
}

json to_json(const Gmm& g) {
  return {{"weights", g.weights}, {"means", g.means}, {"stddevs", g.stddevs}};
}

Gmm gmm_from_json(const json& j) {
  Gmm g;
  g.weights = j.at("weights").get<std::vector<double>>();
  g.means = j.at("means").get<std::vector<double>>();
  g.stddevs = j.at("stddevs").get<std::vector<double>>();
  g.validate();
  return g;
}

json to_json(const JointGmm& g) {
  json components = json::array();
  for (std::size_t k = 0; k < g.size(); ++k) {
    json mean = json::array();
    for (Eigen::Index i = 0; i < g.means[k].size(); ++i) mean.push_back(g.means[k][i]);
    components.push_back({{"weight", g.weights[k]},
                          {"mean", std::move(mean)},
                          {"covariance", matrix_to_json(g.covariances[k])}});
  }
  return {{"past_len", g.past_len},
          {"future_len", g.future_len},
          {"components", std::move(components)}};
}

JointGmm joint_gmm_from_json(const json& j) {
  JointGmm g;
  g.past_len = j.at("past_len").get<std::size_t>();
  g.future_len = j.at("future_len").get<std::size_t>();
  for (const auto& c : j.at("components")) {
    g.weights.push_back(c.at("weight").get<double>());
    const auto mean = c.at("mean").get<std::vector<double>>();
    Eigen::VectorXd m(static_cast<Eigen::Index>(mean.size()));
    for (std::size_t i = 0; i < mean.size(); ++i)
      m[static_cast<Eigen::Index>(i)] = mean[i];
    g.means.push_back(std::move(m));
    g.covariances.push_back(matrix_from_json(c.at("covariance")));
  }
  g.validate();
  return g;
}

json to_json(const KoopmanModel& m) {
  return {{"A", matrix_to_json(m.A)},
          {"B", matrix_to_json(m.B)},
          {"C", matrix_to_json(m.C)},
          {"training_residual", m.training_residual},
          {"dictionary",
           {{"delay_count", m.dict.delay_count},
            {"rbf_count", m.dict.rbf_count},
            {"rbf_centers", m.dict.rbf_centers},
            {"rbf_bandwidth", m.dict.rbf_bandwidth},
            {"include_constant", m.dict.include_constant}}}};
}

KoopmanModel koopman_model_from_json(const json& j) {
  KoopmanModel m;
  m.A = matrix_from_json(j.at("A"));
  m.B = matrix_from_json(j.at("B"));
  m.C = matrix_from_json(j.at("C"));
  m.training_residual = j.value("training_residual", 0.0);
  const auto& d = j.at("dictionary");
  m.dict.delay_count = d.at("delay_count").get<std::size_t>();
  m.dict.rbf_count = d.at("rbf_count").get<std::size_t>();
  m.dict.rbf_centers = d.at("rbf_centers").get<std::vector<double>>();
  m.dict.rbf_bandwidth = d.at("rbf_bandwidth").get<double>();
  m.dict.include_constant = d.at("include_constant").get<bool>();
  m.dict.validate();
  if (m.A.rows() != static_cast<Eigen::Index>(m.dict.lift_dim()))
    throw argument_error("koopman_model_from_json: dimension mismatch");
  return m;
}

json to_json(const Coupling& c) {
  json w = json::array();
  for (std::size_t r = 0; r < c.rows; ++r) {
    json row = json::array();
    for (std::size_t l = 0; l < c.cols; ++l) row.push_back(c(r, l));
    w.push_back(std::move(row));
  }
  return {{"w", std::move(w)},
          {"row_marginals", c.row_marginals},
          {"col_marginals", c.col_marginals}};
}

json to_json(const WorstCaseResult& r) {
  return {{"zeta", r.zeta},
          {"worst", to_json(r.worst)},
          {"coupling", to_json(r.coupling)},
          {"objective_trace", r.objective_trace},
          {"active_distance_sq", r.active_distance_sq}};
}

void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& t) {
  std::ofstream out(file);
  if (!out) throw argument_error("cannot open " + file.string());
  out << "time,freq_dev,injected_power\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < t.size(); ++i)
    out << t.times[i] << ',' << t.freq_dev[i] << ',' << t.injected_power[i] << '\n';
}

Trajectory read_trajectory_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw argument_error("cannot open " + file.string());
  Trajectory t;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    t.times.push_back(std::stod(cell));
    std::getline(ss, cell, ',');
    t.freq_dev.push_back(std::stod(cell));
    std::getline(ss, cell, ',');
    t.injected_power.push_back(std::stod(cell));
  }
  t.validate();
  return t;
}

void write_dataset(const std::filesystem::path& dir, const SfrParams& params,
                   const std::vector<Trajectory>& trajectories,
                   const std::vector<double>& deficits, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["params"] = to_json(params);
  manifest["seed"] = seed;
  manifest["deficits"] = deficits;
  json files = json::array();
  json noise_seeds = json::array();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    std::ostringstream name;
    name << "traj_" << std::setw(4) << std::setfill('0') << i << ".csv";
    write_trajectory_csv(dir / name.str(), trajectories[i]);
    files.push_back(name.str());
    noise_seeds.push_back(trajectories[i].noise_seed);
  }
  manifest["files"] = std::move(files);
  manifest["noise_seeds"] = std::move(noise_seeds);
  write_json_file(dir / "manifest.json", manifest);
}

std::vector<Trajectory> read_dataset(const std::filesystem::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  std::vector<Trajectory> out;
  const auto noise_seeds = manifest.value("noise_seeds", std::vector<std::uint64_t>{});
  std::size_t i = 0;
  for (const auto& f : manifest.at("files")) {
    Trajectory t = read_trajectory_csv(dir / f.get<std::string>());
    if (i < noise_seeds.size()) t.noise_seed = noise_seeds[i];
    out.push_back(std::move(t));
    ++i;
  }
  return out;
}

void write_json_file(const std::filesystem::path& file, const json& j) {
  std::ofstream out(file);
  if (!out) throw argument_error("cannot open " + file.string());
  out << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw argument_error("cannot open " + file.string());
  json j;
  in >> j;
  return j;
}

std::vector<double> read_samples_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw argument_error("cannot open " + file.string());
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      continue;  // header or junk line
    }
  }
  return out;
}

void write_samples_csv(const std::filesystem::path& file,
                       const std::vector<double>& samples,
                       const std::string& header) {
  std::ofstream out(file);
  if (!out) throw argument_error("cannot open " + file.string());
  out << header << '\n' << std::setprecision(17);
  for (double v : samples) out << v << '\n';
}

std::string config_hash(const json& j) {
  const std::string dump = j.dump();  // nlohmann objects iterate sorted by key
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace drefc::io
