#pragma once
// File formats. Everything is UTF-8 text with LF line endings and
// locale-independent number formatting (shortest round-trip decimal).
//
//   campaign CSV   mission,phase,test_cases,bugs_detected
//   draws CSV      "# sbrel-draws 1" stamp, "# key=value" metadata lines,
//                  then chain,iteration,parameter,value
//   state CSV      optional companion of a draws file (<draws>.state.csv):
//                  chain,iteration,candidate,z,S,lambda
//   truth CSV      candidate,real,size,lambda,mission,phase
//   trace CSV      chain,iteration,value
//   curve CSV      epsilon,reliability
//   report JSON    schema "sbrel-report/1"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sbrel/diagnostics.hpp"
#include "sbrel/model.hpp"
#include "sbrel/sampler.hpp"
#include "sbrel/simulate.hpp"

namespace sbrel {

namespace fs = std::filesystem;

TestCampaign parse_campaign(std::istream& in);
TestCampaign read_campaign(const fs::path& path);
void write_campaign(const TestCampaign& campaign, std::ostream& out);
void write_campaign(const TestCampaign& campaign, const fs::path& path);

/// Detected bugs go to slots 1..n in (mission, phase) order; the remaining
/// M - n slots are undetected.
BugAssignment build_assignment(const TestCampaign& campaign, std::int64_t max_bugs);

void write_draws(const ChainSet& draws, const fs::path& path, bool include_full_state = false);
ChainSet read_draws(const fs::path& path, bool load_full_state = false);
void write_draws(const ChainSet& draws, std::ostream& out);
ChainSet parse_draws(std::istream& in);
fs::path state_companion_path(const fs::path& draws_path);

void write_truth(const GroundTruth& truth, const fs::path& path);
GroundTruth read_truth(const fs::path& path);

void write_trace(const std::vector<TraceRecord>& records, const fs::path& path);
std::vector<TraceRecord> read_trace(const fs::path& path);

void write_curve(const std::vector<ReliabilityPoint>& curve, const fs::path& path);

std::string report_to_json(const PosteriorReport& report);
void write_report(const PosteriorReport& report, const fs::path& path);

/// Flat key=value echo of a run configuration, as stored in draws metadata.
std::map<std::string, std::string> config_metadata(const ModelConfig& model,
                                                   const SamplerConfig& sampler);
ModelConfig model_config_from_metadata(const std::map<std::string, std::string>& meta);
SamplerConfig sampler_config_from_metadata(const std::map<std::string, std::string>& meta);

/// Shortest decimal string that parses back to the same double.
std::string format_number(double v);
double parse_number(const std::string& s);

}  // namespace sbrel
