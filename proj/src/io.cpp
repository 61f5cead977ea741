#include "twostep/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace twostep {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& rows) {
  if (static_cast<long>(header.size()) != rows.cols())
    throw std::invalid_argument("write_csv: header/column mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (long i = 0; i < rows.rows(); ++i) {
    for (long j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << format_double(rows(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file " + path.string());
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw std::runtime_error("read_csv: ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  table.rows.resize(static_cast<long>(rows.size()), static_cast<long>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      table.rows(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  return table;
}

void write_tposterior(const std::filesystem::path& csv_path, const TPosterior& tpost) {
  std::vector<std::string> header;
  for (int j = 0; j < tpost.n_coeffs(); ++j) header.push_back("c" + std::to_string(j));
  if (tpost.includes_sigma_a) header.push_back("sigma_a");
  write_csv(csv_path, header, tpost.draws);

  nlohmann::json meta;
  meta["includes_sigma_a"] = tpost.includes_sigma_a;
  meta["dataset_hash"] = tpost.dataset_hash;
  meta["seed"] = tpost.seed;
  meta["rhat_ok"] = tpost.rhat_ok;
  if (tpost.rhat.size() > 0) {
    std::vector<double> rhat(tpost.rhat.data(), tpost.rhat.data() + tpost.rhat.size());
    meta["rhat"] = rhat;
  }
  if (tpost.analytic) {
    std::vector<double> mean(tpost.analytic->mean.data(),
                             tpost.analytic->mean.data() + tpost.analytic->mean.size());
    std::vector<std::vector<double>> cov;
    for (long i = 0; i < tpost.analytic->cov.rows(); ++i)
      cov.emplace_back(tpost.analytic->cov.row(i).data(),
                       tpost.analytic->cov.row(i).data() + tpost.analytic->cov.cols());
    meta["analytic"] = {{"mean", mean}, {"cov", cov}};
  }
  std::ofstream out(csv_path.string() + ".meta.json");
  out << meta.dump(2) << '\n';
}

TPosterior read_tposterior(const std::filesystem::path& csv_path) {
  const CsvTable table = read_csv(csv_path);
  TPosterior t;
  t.draws = table.rows;
  t.includes_sigma_a = !table.header.empty() && table.header.back() == "sigma_a";
  const std::filesystem::path meta_path = csv_path.string() + ".meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    nlohmann::json meta;
    in >> meta;
    t.includes_sigma_a = meta.value("includes_sigma_a", t.includes_sigma_a);
    t.dataset_hash = meta.value("dataset_hash", 0ULL);
    t.seed = meta.value("seed", 0ULL);
    t.rhat_ok = meta.value("rhat_ok", true);
    if (meta.contains("analytic")) {
      AnalyticGaussian g;
      const auto mean = meta["analytic"]["mean"].get<std::vector<double>>();
      g.mean = Eigen::Map<const Vector>(mean.data(), static_cast<long>(mean.size()));
      const auto cov = meta["analytic"]["cov"].get<std::vector<std::vector<double>>>();
      g.cov.resize(static_cast<long>(cov.size()), static_cast<long>(cov.size()));
      for (std::size_t i = 0; i < cov.size(); ++i)
        for (std::size_t j = 0; j < cov[i].size(); ++j)
          g.cov(static_cast<long>(i), static_cast<long>(j)) = cov[i][j];
      t.analytic = g;
    }
  }
  return t;
}

void write_iposterior(const std::filesystem::path& csv_path, const IPosterior& ipost,
                      const std::vector<std::string>& omega_names) {
  std::vector<std::string> header = omega_names;
  if (ipost.includes_sigma_i) header.push_back("sigma_i");
  if (static_cast<long>(header.size()) != ipost.draws.cols())
    throw std::invalid_argument("write_iposterior: name/column mismatch");
  write_csv(csv_path, header, ipost.draws);
}

void write_chains_csv(const std::filesystem::path& path, const Chains& chains) {
  const int dim = chains.dim();
  Matrix rows(chains.n_total(), dim + 2);
  long row = 0;
  for (int c = 0; c < chains.n_chains(); ++c) {
    const Matrix& d = chains.draws[static_cast<std::size_t>(c)];
    for (long i = 0; i < d.rows(); ++i, ++row) {
      rows(row, 0) = c;
      rows(row, 1) = static_cast<double>(i);
      rows.row(row).tail(dim) = d.row(i);
    }
  }
  std::vector<std::string> header = {"chain", "iter"};
  for (int j = 0; j < dim; ++j) header.push_back("p" + std::to_string(j));
  write_csv(path, header, rows);
}

void write_grid_density_csv(const std::filesystem::path& path, const GridDensity& grid) {
  Matrix rows(grid.omega.size(), 2);
  rows.col(0) = grid.omega;
  rows.col(1) = grid.pdf;
  write_csv(path, {"omega", "density"}, rows);
}

void write_sbc_records_csv(const std::filesystem::path& path,
                           const std::vector<SbcRecord>& records) {
  Matrix rows(static_cast<long>(records.size()), 7);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    rows.row(static_cast<long>(i)) << r.t_trial, r.i_trial, r.dim, r.omega_star, r.rank, r.k_eff,
        r.rhat_max;
  }
  write_csv(path, {"t_trial", "i_trial", "dim", "omega_star", "rank", "k_eff", "rhat_max"}, rows);
}

void write_envelope_csv(const std::filesystem::path& path, const EcdfEnvelope& env) {
  Matrix rows(env.eval.size(), 4);
  rows.col(0) = env.eval;
  rows.col(1) = env.lower;
  rows.col(2) = env.upper;
  rows.col(3) = env.ecdf_diff;
  write_csv(path, {"eval", "lower", "upper", "ecdf_diff"}, rows);
}

void write_training_data_csv(const std::filesystem::path& path, const TrainingDataset& data) {
  const long dim = data.inputs.cols();
  Matrix rows(data.size(), dim + 2);
  rows.leftCols(dim) = data.inputs;
  rows.col(dim) = data.noise_hypers;
  rows.col(dim + 1) = data.outputs;
  std::vector<std::string> header;
  for (long j = 0; j < dim; ++j) header.push_back("omega" + std::to_string(j));
  header.push_back("sigma_s");
  header.push_back("y");
  write_csv(path, header, rows);
}

void write_measurements_csv(const std::filesystem::path& path, const Measurements& meas) {
  const bool has_times = meas.times.has_value();
  Matrix rows(meas.size(), has_times ? 2 : 1);
  if (has_times) {
    rows.col(0) = *meas.times;
    rows.col(1) = meas.ys;
    write_csv(path, {"t", "y"}, rows);
  } else {
    rows.col(0) = meas.ys;
    write_csv(path, {"y"}, rows);
  }
}

}  // namespace twostep
