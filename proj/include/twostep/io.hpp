#pragma once

// CSV and JSON persistence for draws, datasets, densities, and SBC records.
// CSV files carry a header row, '.' decimals, UTF-8, and round-trippable
// double formatting.

#include "twostep/calibration.hpp"
#include "twostep/istep.hpp"
#include "twostep/mcmc.hpp"
#include "twostep/tstep.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace twostep {

std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& rows);

struct CsvTable {
  std::vector<std::string> header;
  Matrix rows;
};

CsvTable read_csv(const std::filesystem::path& path);

// TPosterior draws with a JSON provenance sidecar (<path>.meta.json) so
// I-step runs can be decoupled from training runs.
void write_tposterior(const std::filesystem::path& csv_path, const TPosterior& tpost);
TPosterior read_tposterior(const std::filesystem::path& csv_path);

void write_iposterior(const std::filesystem::path& csv_path, const IPosterior& ipost,
                      const std::vector<std::string>& omega_names);

void write_chains_csv(const std::filesystem::path& path, const Chains& chains);

void write_grid_density_csv(const std::filesystem::path& path, const GridDensity& grid);

void write_sbc_records_csv(const std::filesystem::path& path,
                           const std::vector<SbcRecord>& records);

void write_envelope_csv(const std::filesystem::path& path, const EcdfEnvelope& env);

void write_training_data_csv(const std::filesystem::path& path, const TrainingDataset& data);

void write_measurements_csv(const std::filesystem::path& path, const Measurements& meas);

}  // namespace twostep
