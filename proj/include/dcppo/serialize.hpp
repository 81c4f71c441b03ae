#pragma once

#include "dcppo/diagnostics.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>

namespace dcppo {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

// JSON codecs. Matrices are stored as dense row-major arrays next to their
// dimensions; integer fields round-trip bit-exactly and reals are written
// with full precision.
nlohmann::json to_json(const TabularLinearMdp& mdp);
TabularLinearMdp mdp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BehaviorModel& bm, int S, int A);
BehaviorModel behavior_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ChoiceDataset& ds);
ChoiceDataset dataset_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EstimatedModel& est);
EstimatedModel estimate_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RecoveredReward& rec);
RecoveredReward reward_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PessimisticPolicy& pp);
PessimisticPolicy policy_from_json(const nlohmann::json& j);

nlohmann::json to_json(const KernelEstimate& est);

nlohmann::json to_json(const CoverageReport& rep);
nlohmann::json to_json(const EffectiveDimensions& ed);
nlohmann::json to_json(const ViolationStats& vs);
nlohmann::json to_json(const SlopeFit& fit);
nlohmann::json to_json(const CalibrationResult& cal);
nlohmann::json to_json(const SweepResult& sr);

// CSV exports (full-precision doubles, one header row).
std::string dataset_to_csv(const ChoiceDataset& ds);
std::string certificate_to_csv(const RewardCertificate& cert);
std::string penalties_to_csv(const PessimisticPolicy& pp);
std::string sweep_cell_csv_header();
std::string sweep_cell_csv_row(const CellResult& cell);

/// Writes via a temporary file in the same directory followed by a rename,
/// creating parent directories as needed.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// FNV-1a 64-bit hash of a canonical JSON dump, as fixed-width hex. Embedded
/// in every output file for provenance.
std::string config_hash(const nlohmann::json& config);

} // namespace dcppo
